//! Online two-sided matching with stochastic supply and demand.
//!
//! Supply unit `(j, s)` arrives in period `s` with probability `mu_js` and
//! stays until matched; demand unit `(i, t)` arrives with probability
//! `lambda_it` and must be matched or lost on arrival. The online algorithm
//! solves the fluid relaxation once, routes each demand arrival to an
//! arrived unit with probability `p_ijts(S_t)`, and admits the match only if
//! the reward clears the unit's own threshold.

mod admission;
mod checks;
mod instance;
mod plan;
mod policies;

pub use admission::{admission_threshold, ContinuationSet, SupplyState, UnitState, MASS_TOL};
pub use checks::{check_separation_bound, lemma4_check, separation_mean_exact};
pub use instance::{sample_realization, MatchInstance, MatchInstanceSpec, Realization, RewardEntry};
pub use plan::{separation_pick, separation_probs, separation_scale, RouteEntry, RoutingPlan, UnitEntry, PICK_TOL};
pub use policies::{
    fallback_margin, offline_value, run_bid_price, run_greedy, run_online, run_online_plus, Decision,
    EventKind, Match, MatchEvent, MatchTrace, RejectReason,
};

use crate::flow::FlowError;

#[derive(Debug, thiserror::Error)]
pub enum MatchError {
    #[error("malformed instance: {0}")]
    Shape(String),
    #[error("{side} rate of type {ty} in period {period} is {value}, expected a value in (0, 1]")]
    InvalidRate {
        side: &'static str,
        ty: usize,
        period: usize,
        value: f64,
    },
    #[error("{side} rates in period {period} sum to {sum} > 1")]
    RateSumExceeded { side: &'static str, period: usize, sum: f64 },
    #[error("reward r[{i}][{j}][{t}][{s}] = {r} is not finite")]
    InvalidReward { i: usize, j: usize, t: usize, s: usize, r: f64 },
    #[error("reward r[{i}][{j}][{t}][{s}] pairs demand with supply that arrives later")]
    FutureReward { i: usize, j: usize, t: usize, s: usize },
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("internal consistency check failed: {0}")]
    Consistency(String),
    #[error("sample count must be positive, got {0}")]
    InvalidSampleCount(usize),
    #[error("margin multiplier must be at least 1, got {0}")]
    InvalidMultiplier(f64),
    #[error("{0}")]
    Domain(String),
}
