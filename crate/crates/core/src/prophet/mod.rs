//! Single-resource selling with correlated arrivals.
//!
//! The simulation-based threshold policy (STP) sells to the first arrival
//! whose reward is at least
//! `h(S_t) = E[sum_{t'>t} sum_i r p | S_t] / (1 + tbar - sum_{t'<=t} sum_i p)`.
//! This module computes the threshold exactly or by simulation, runs the
//! policy, and checks its guarantees on enumerable trees.

mod diagnostics;
mod stp;
mod threshold;
mod tight;

pub use diagnostics::{
    check_optional_stopping, check_optional_stopping_with, check_submartingale,
    check_submartingale_with, ratio_lemma_check, verify_tree, verify_tree_mc, z_trace,
    McProphetReport, OptionalStopping, ProphetReport, ZTrace,
};
pub use stp::{
    expected_offline_value, offline_oracle, reward_mass_bound, run_stp, run_stp_with_table,
    stp_value_recursion, stp_values, Estimator, StpTrace,
};
pub use threshold::{threshold_exact, threshold_mc, ThresholdEstimate, ThresholdTable};
pub use tight::tight_instance;

use crate::scenario::TreeError;

/// Slack allowed when checking `tbar` against realized path mass.
pub const BOUND_TOL: f64 = 1e-9;

/// Tolerance for the exact guarantee checks.
pub const VERIFY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolicyError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("invalid upper bound: tbar {tbar} is below realized path mass {required}")]
    InvalidUpperBound { tbar: f64, required: f64 },
    #[error("sample count must be at least 1, got {0}")]
    InvalidSampleCount(usize),
    #[error("node index {0} out of range")]
    NodeOutOfRange(usize),
    #[error("domain violation: {0}")]
    Domain(String),
}
