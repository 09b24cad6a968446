//! Threshold policies for prophet inequalities with correlated arrival
//! probabilities, and an online two-sided matching algorithm built on them.
//!
//! Module map:
//!
//! * [`scenario`] - scenario trees for the exogenous process and arrival sampling.
//! * [`prophet`] - the simulation-based threshold policy (STP), its exact value
//!   recursion, offline benchmarks and the Z-process diagnostics.
//! * [`flow`] - bipartite max-reward flow solver used for the fluid upper bound
//!   and for offline matchings, with dual prices.
//! * [`matching`] - the separation/admission online matching algorithm and the
//!   greedy, bid-price and resource-sharing baselines.
//! * [`experiments`] - synthetic freelancer markets and benchmark tables.

pub mod experiments;
pub mod flow;
pub mod matching;
pub mod prophet;
pub mod scenario;
pub mod seed;
pub mod stats;

pub use seed::{derive_seed, SimRng};
