use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::market::{draw_scenario, ScenarioDraw};
use super::report::confidence_interval;
use super::{ExperimentConfig, ExperimentError};
use crate::matching::{
    offline_value, run_bid_price, run_greedy, run_online, run_online_plus, sample_realization, MatchError,
    MatchInstance, Realization, RoutingPlan,
};
use crate::seed::{derive_seed, rng_for};
use crate::stats::Welford;

// stream tags for derive_seed
const TAG_SCENARIO: u64 = 1;
const TAG_REALIZATION: u64 = 2;
const TAG_THRESHOLD: u64 = 3;

/// Slack allowed when checking a policy against the hindsight optimum.
const OFFLINE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PolicyKind {
    Online,
    Greedy,
    BidPrice,
    /// Resource-sharing variant with its 1-based column index and margin
    /// multiplier.
    OnlinePlus { index: usize, multiplier: f64 },
}

impl PolicyKind {
    pub fn name(&self) -> String {
        match self {
            PolicyKind::Online => "ON".into(),
            PolicyKind::Greedy => "Greedy".into(),
            PolicyKind::BidPrice => "BPH".into(),
            PolicyKind::OnlinePlus { index, .. } => format!("ON+{index}"),
        }
    }

    /// Column order of the tables: ON, Greedy, BPH, then the variants.
    pub fn lineup(multipliers: &[f64]) -> Vec<PolicyKind> {
        let mut out = vec![PolicyKind::Online, PolicyKind::Greedy, PolicyKind::BidPrice];
        out.extend(multipliers.iter().enumerate().map(|(k, &multiplier)| PolicyKind::OnlinePlus {
            index: k + 1,
            multiplier,
        }));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyStats {
    pub name: String,
    pub mean_reward: f64,
    /// Mean reward over the fluid-relaxation objective.
    pub ratio: f64,
    /// Standard error of `ratio`.
    pub stderr: f64,
    /// 95% half-width of `ratio`; absent with a single replicate.
    pub halfwidth: Option<f64>,
    /// Mean reward over the mean hindsight-optimal reward.
    pub offline_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub label: String,
    pub replicates: usize,
    pub lp_objective: f64,
    /// The relaxation is worth nothing, so every ratio is reported as 0.
    pub lp_zero: bool,
    pub offline_mean: f64,
    /// Mean hindsight-optimal reward over the relaxation objective.
    pub offline_ratio: f64,
    pub policies: Vec<PolicyStats>,
}

impl SimReport {
    pub fn policy(&self, name: &str) -> Option<&PolicyStats> {
        self.policies.iter().find(|p| p.name == name)
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Rewards of every policy in `lineup` and the hindsight optimum, all on the
/// same realization.
fn run_replicate(
    inst: &MatchInstance,
    plan: &RoutingPlan,
    real: &Realization,
    lineup: &[PolicyKind],
    n_inner_paths: usize,
    threshold_seed: u64,
) -> Result<(Vec<f64>, f64), MatchError> {
    let offline = offline_value(inst, real)?;
    let mut rewards = Vec::with_capacity(lineup.len());
    for kind in lineup {
        let trace = match *kind {
            PolicyKind::Online => run_online(inst, plan, real, n_inner_paths, threshold_seed)?,
            PolicyKind::Greedy => run_greedy(inst, real),
            PolicyKind::BidPrice => run_bid_price(inst, plan, real),
            PolicyKind::OnlinePlus { multiplier, .. } => {
                run_online_plus(inst, plan, real, n_inner_paths, multiplier, threshold_seed)?
            }
        };
        if trace.total_reward > offline + OFFLINE_TOL * (1.0 + offline.abs()) {
            return Err(MatchError::Consistency(format!(
                "{} earned {} above the hindsight optimum {offline}",
                kind.name(),
                trace.total_reward
            )));
        }
        rewards.push(trace.total_reward);
    }
    Ok((rewards, offline))
}

/// The random market selected by `config.master_seed` and `config.scenario`.
pub fn scenario_for(config: &ExperimentConfig) -> ScenarioDraw {
    let mut rng = rng_for(config.master_seed, &[TAG_SCENARIO, config.scenario]);
    draw_scenario(config, &mut rng)
}

/// Draws the market of `config` and benchmarks every policy on it.
pub fn run_benchmark(config: &ExperimentConfig) -> Result<SimReport, ExperimentError> {
    config.validate()?;
    let inst = scenario_for(config).build(config)?;
    run_benchmark_on(config, &inst, "base")
}

/// Benchmarks every policy on `inst` over `config.replicates` realizations.
/// Replicates run in parallel; results are reduced in replicate order, so the
/// report does not depend on the thread count.
pub fn run_benchmark_on(
    config: &ExperimentConfig,
    inst: &MatchInstance,
    label: &str,
) -> Result<SimReport, ExperimentError> {
    config.validate()?;
    let plan = RoutingPlan::solve(inst)?;
    let lp = plan.objective();
    let lineup = PolicyKind::lineup(&config.margin_multipliers);
    let (master, scenario) = (config.master_seed, config.scenario);

    let results: Vec<Result<(Vec<f64>, f64), MatchError>> = (0..config.replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rng_for(master, &[TAG_REALIZATION, scenario, rep as u64]);
            let real = sample_realization(inst, &mut rng);
            let seed = derive_seed(master, &[TAG_THRESHOLD, scenario, rep as u64]);
            run_replicate(inst, &plan, &real, &lineup, config.n_inner_paths, seed)
        })
        .collect();

    let mut per_policy: Vec<Vec<f64>> = vec![Vec::with_capacity(config.replicates); lineup.len()];
    let mut offline = Welford::new();
    for (index, r) in results.into_iter().enumerate() {
        let (rewards, off) = r.map_err(|source| ExperimentError::Replicate { index, source })?;
        offline.push(off);
        for (k, v) in rewards.into_iter().enumerate() {
            per_policy[k].push(v);
        }
    }

    let policies = lineup
        .iter()
        .zip(&per_policy)
        .map(|(kind, rewards)| {
            let ratios: Vec<f64> = rewards.iter().map(|&v| ratio(v, lp)).collect();
            let w: Welford = ratios.iter().copied().collect();
            let mean_reward = rewards.iter().copied().collect::<Welford>().mean();
            PolicyStats {
                name: kind.name(),
                mean_reward,
                ratio: w.mean(),
                stderr: w.stderr(),
                halfwidth: confidence_interval(&ratios).ok().map(|c| c.1),
                offline_ratio: ratio(mean_reward, offline.mean()),
            }
        })
        .collect();

    Ok(SimReport {
        label: label.to_string(),
        replicates: config.replicates,
        lp_objective: lp,
        lp_zero: lp <= 0.0,
        offline_mean: offline.mean(),
        offline_ratio: ratio(offline.mean(), lp),
        policies,
    })
}
