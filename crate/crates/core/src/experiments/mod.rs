//! Synthetic freelancer markets and policy benchmarks.
//!
//! A market has `I` employer (demand) types and `J` worker (supply) types.
//! Matching employer `i` arriving at `t` with worker `j` who arrived at `s`
//! earns `r_ijts = s_ij * f_ts * g_ij`: ability `s_ij ~ N(0, 1)`, idle-time
//! discount `f_ts = 1 - alpha + alpha * exp(-(t - s) / tau)` and distance
//! discount `g_ij = 1 - beta + beta * exp(-d(i, j) / omega)`.

mod benchmark;
mod config;
mod market;
mod report;

pub use benchmark::{run_benchmark, run_benchmark_on, scenario_for, PolicyKind, PolicyStats, SimReport};
pub use config::{ExperimentConfig, SweepParam, SweepPoint};
pub use market::{
    distance_discount, draw_scenario, generate_market, idle_discount, GeneratedScenario, Geography, ScenarioDraw,
};
pub use report::{confidence_interval, render_csv, render_text, reproduce_tables, TableRow};

use crate::matching::MatchError;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("replicate {index}: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: MatchError,
    },
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error("need at least 2 samples for a confidence interval, got {0}")]
    TooFewSamples(usize),
}
