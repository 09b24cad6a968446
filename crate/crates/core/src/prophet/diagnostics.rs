//! Exact checks of the STP guarantees on enumerable trees.
//!
//! `Z(S_t) = h(S_t) + sum_{t'<=t} sum_i p_it' (r_it' - h(S_t'))^+` is a
//! submartingale whose stopped expectation equals the STP value. Both facts
//! are computed node by node here, so each check is exact up to rounding.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::stp::{expected_offline_value, offline_oracle, reward_mass_bound, run_stp};
use super::threshold::ThresholdTable;
use super::{Estimator, PolicyError, StpTrace, VERIFY_TOL};
use crate::scenario::{sample_path, tbar_upper_bound, ScenarioTree};
use crate::stats::Welford;

/// `Z(S_t)` along one STP run, for `t = 0..=min(tau, T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZTrace {
    pub z_values: Vec<f64>,
}

/// `sum_i p_i (r_i - h)^+` at node `k`.
fn positive_part_mass(tree: &ScenarioTree, k: usize, h: f64) -> f64 {
    let node = tree.node(k);
    node.arrival_probs
        .iter()
        .zip(&node.rewards)
        .map(|(&p, &r)| p * (r - h).max(0.0))
        .sum()
}

/// `Z` along the periods recorded in `trace`.
pub fn z_trace(tree: &ScenarioTree, trace: &StpTrace) -> ZTrace {
    let mut acc = 0.0;
    let z_values = trace
        .thresholds_seen
        .iter()
        .enumerate()
        .map(|(t, &h)| {
            acc += positive_part_mass(tree, trace.path.nodes[t], h);
            h + acc
        })
        .collect();
    ZTrace { z_values }
}

/// `max` over internal nodes of `Z(S_{t-1}) - E[Z(S_t) | S_{t-1}]`, with the
/// thresholds in `table`. The running sum is common to both terms and cancels.
pub fn check_submartingale_with(tree: &ScenarioTree, table: &ThresholdTable) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for k in 0..tree.len() {
        let kids = tree.children(k);
        if kids.is_empty() {
            continue;
        }
        let next: f64 = kids
            .iter()
            .map(|&c| {
                let h = table.get(c);
                tree.node(c).branch_prob * (h + positive_part_mass(tree, c, h))
            })
            .sum();
        worst = worst.max(table.get(k) - next);
    }
    worst
}

pub fn check_submartingale(tree: &ScenarioTree, tbar: f64, cap: usize) -> Result<f64, PolicyError> {
    tree.ensure_enumerable(tree.root(), cap)?;
    Ok(check_submartingale_with(tree, &ThresholdTable::exact(tree, tbar)?))
}

/// Both sides of the optional-stopping identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionalStopping {
    pub e_v_stp: f64,
    pub e_z_tau: f64,
}

impl OptionalStopping {
    pub fn gap(&self) -> f64 {
        (self.e_v_stp - self.e_z_tau).abs()
    }
}

/// `E[V^STP]` and `E[Z(S_tau)]` by a forward pass over the tree, where
/// `q(k)` is the probability of reaching `k` with the resource unsold.
pub fn check_optional_stopping_with(tree: &ScenarioTree, table: &ThresholdTable) -> OptionalStopping {
    let n = tree.len();
    let mut reach = vec![0.0; n];
    let mut running = vec![0.0; n];
    reach[tree.root()] = 1.0;
    let mut e_v_stp = 0.0;
    let mut e_z_tau = 0.0;
    for k in 0..n {
        let node = tree.node(k);
        let h = table.get(k);
        let parent_running = node.parent.map_or(0.0, |p| running[p]);
        running[k] = parent_running + positive_part_mass(tree, k, h);
        let (accept, served): (f64, f64) = node
            .arrival_probs
            .iter()
            .zip(&node.rewards)
            .filter(|(_, &r)| r >= h)
            .fold((0.0, 0.0), |(a, s), (&p, &r)| (a + p, s + p * r));
        e_v_stp += reach[k] * served;
        e_z_tau += reach[k] * accept * (h + running[k]);
        let unsold = reach[k] * (1.0 - accept);
        let kids = tree.children(k);
        if kids.is_empty() {
            // never sold: Z(S_{T+1}) has h = 0
            e_z_tau += unsold * running[k];
        }
        for &c in kids {
            reach[c] = unsold * tree.node(c).branch_prob;
        }
    }
    OptionalStopping { e_v_stp, e_z_tau }
}

pub fn check_optional_stopping(
    tree: &ScenarioTree,
    tbar: f64,
    cap: usize,
) -> Result<OptionalStopping, PolicyError> {
    tree.ensure_enumerable(tree.root(), cap)?;
    Ok(check_optional_stopping_with(tree, &ThresholdTable::exact(tree, tbar)?))
}

/// `(a + sum p r) / (b + sum p) <= a/b + sum p (r - a/b)^+`, up to 1e-12.
pub fn ratio_lemma_check(a: f64, b: f64, p: &[f64], r: &[f64]) -> Result<bool, PolicyError> {
    let bad = |x: &f64| !x.is_finite() || *x < 0.0;
    if !a.is_finite() || a < 0.0 || !b.is_finite() || b < 1.0 {
        return Err(PolicyError::Domain(format!("need a >= 0 and b >= 1, got a={a}, b={b}")));
    }
    if p.len() != r.len() || p.iter().any(bad) || r.iter().any(bad) {
        return Err(PolicyError::Domain("p and r must be equal-length non-negative vectors".into()));
    }
    let ratio = a / b;
    let lhs = (a + p.iter().zip(r).map(|(p, r)| p * r).sum::<f64>()) / (b + p.iter().sum::<f64>());
    let rhs = ratio + p.iter().zip(r).map(|(p, r)| p * (r - ratio).max(0.0)).sum::<f64>();
    Ok(lhs <= rhs + 1e-12)
}

/// Exact verification summary for one tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProphetReport {
    pub tbar: f64,
    pub reward_mass_bound: f64,
    pub e_v_off: f64,
    pub e_v_stp: f64,
    /// `e_v_stp / e_v_off`, or 1 when the offline value is 0.
    pub ratio: f64,
    /// `e_v_stp / reward_mass_bound`, or 1 when the bound is 0.
    pub ratio_to_mass_bound: f64,
    /// `reward_mass_bound / (1 + tbar)`.
    pub lower_bound: f64,
    pub submartingale_max_violation: f64,
    pub optional_stopping_gap: f64,
    pub passed: bool,
}

fn ratio_or_one(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        1.0
    }
}

/// Runs every exact check. `table` overrides the policy's thresholds when
/// given (useful as a negative control); otherwise they are computed exactly.
pub fn verify_tree(
    tree: &ScenarioTree,
    tbar: Option<f64>,
    table: Option<&ThresholdTable>,
    cap: usize,
) -> Result<ProphetReport, PolicyError> {
    tree.ensure_enumerable(tree.root(), cap)?;
    let tbar = tbar.unwrap_or_else(|| tbar_upper_bound(tree));
    let exact;
    let table = match table {
        Some(t) => t,
        None => {
            exact = ThresholdTable::exact(tree, tbar)?;
            &exact
        }
    };
    let bound = reward_mass_bound(tree, cap)?;
    let e_v_off = expected_offline_value(tree, cap)?;
    let os = check_optional_stopping_with(tree, table);
    let violation = check_submartingale_with(tree, table);
    let lower_bound = bound / (1.0 + tbar);
    let passed = os.e_v_stp >= lower_bound - VERIFY_TOL
        && bound >= e_v_off - VERIFY_TOL
        && violation <= VERIFY_TOL
        && os.gap() <= VERIFY_TOL;
    Ok(ProphetReport {
        tbar,
        reward_mass_bound: bound,
        e_v_off,
        e_v_stp: os.e_v_stp,
        ratio: ratio_or_one(os.e_v_stp, e_v_off),
        ratio_to_mass_bound: ratio_or_one(os.e_v_stp, bound),
        lower_bound,
        submartingale_max_violation: violation,
        optional_stopping_gap: os.gap(),
        passed,
    })
}

/// Simulation summary for trees too large to enumerate. Only the value
/// comparison is checkable; the martingale diagnostics need the full tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McProphetReport {
    pub tbar: f64,
    pub samples: usize,
    pub inner_paths: usize,
    pub reward_mass_bound: f64,
    pub reward_mass_bound_stderr: f64,
    pub e_v_off: f64,
    pub e_v_off_stderr: f64,
    pub e_v_stp: f64,
    pub e_v_stp_stderr: f64,
    pub ratio: f64,
    pub lower_bound: f64,
    /// `e_v_stp >= lower_bound - 3 * stderr`.
    pub passed: bool,
}

/// Estimates the same quantities as [`verify_tree`] from `samples` outer
/// paths, with thresholds from `inner_paths` continuations each.
pub fn verify_tree_mc<R: Rng + ?Sized>(
    tree: &ScenarioTree,
    tbar: Option<f64>,
    samples: usize,
    inner_paths: usize,
    rng: &mut R,
) -> Result<McProphetReport, PolicyError> {
    if samples == 0 {
        return Err(PolicyError::InvalidSampleCount(samples));
    }
    let tbar = tbar.unwrap_or_else(|| tbar_upper_bound(tree));
    let (mut stp, mut off, mut mass) = (Welford::new(), Welford::new(), Welford::new());
    for _ in 0..samples {
        let path = sample_path(tree, rng);
        let trace = run_stp(tree, &path, tbar, Estimator::MonteCarlo { n_paths: inner_paths }, rng)?;
        stp.push(trace.reward);
        off.push(offline_oracle(tree, &path));
        mass.push(path.nodes.iter().map(|&k| tree.node(k).reward_mass()).sum());
    }
    let lower_bound = mass.mean() / (1.0 + tbar);
    Ok(McProphetReport {
        tbar,
        samples,
        inner_paths,
        reward_mass_bound: mass.mean(),
        reward_mass_bound_stderr: mass.stderr(),
        e_v_off: off.mean(),
        e_v_off_stderr: off.stderr(),
        e_v_stp: stp.mean(),
        e_v_stp_stderr: stp.stderr(),
        ratio: ratio_or_one(stp.mean(), off.mean()),
        lower_bound,
        passed: stp.mean() >= lower_bound - 3.0 * (stp.stderr() + mass.stderr() / (1.0 + tbar)),
    })
}
