use rand::Rng;
use serde::{Deserialize, Serialize};

use super::threshold::{threshold_exact, threshold_mc, ThresholdTable};
use super::PolicyError;
use crate::scenario::{SamplePath, ScenarioTree};

/// How STP obtains `h(S_t)` while running along a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// Exact conditional expectation over the subtree.
    Exact { cap: usize },
    /// Fresh Monte Carlo estimate from `n_paths` continuations at each period.
    MonteCarlo { n_paths: usize },
}

/// Outcome of running STP along one sample path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StpTrace {
    pub path: SamplePath,
    /// Period in which the resource was sold, if it was.
    pub accept_period: Option<usize>,
    pub reward: f64,
    /// `h(S_t)` for `t = 0..=last` where `last` is the sale period or `T`.
    pub thresholds_seen: Vec<f64>,
    /// Realized mass `sum_{t' <= t} sum_i p_it'` for `t = 0..=T`.
    pub cumulative_mass: Vec<f64>,
}

impl StpTrace {
    /// Stopping time `tau`, with `T + 1` meaning never sold.
    pub fn stopping_time(&self) -> usize {
        self.accept_period.unwrap_or(self.path.horizon() + 1)
    }
}

fn run_with<F>(tree: &ScenarioTree, path: &SamplePath, mut threshold: F) -> Result<StpTrace, PolicyError>
where
    F: FnMut(usize) -> Result<f64, PolicyError>,
{
    let cumulative_mass = path.nodes.iter().map(|&k| tree.cumulative_mass(k)).collect();
    let mut thresholds_seen = Vec::with_capacity(path.nodes.len());
    let mut accept_period = None;
    let mut reward = 0.0;
    for (t, &k) in path.nodes.iter().enumerate() {
        let h = threshold(k)?;
        thresholds_seen.push(h);
        if let Some(i) = path.arrivals[t] {
            let r = tree.node(k).rewards[i];
            // weak inequality: ties sell
            if r >= h {
                accept_period = Some(t);
                reward = r;
                break;
            }
        }
    }
    Ok(StpTrace {
        path: path.clone(),
        accept_period,
        reward,
        thresholds_seen,
        cumulative_mass,
    })
}

/// Runs STP along `path`, estimating each threshold as it goes.
pub fn run_stp<R: Rng + ?Sized>(
    tree: &ScenarioTree,
    path: &SamplePath,
    tbar: f64,
    estimator: Estimator,
    rng: &mut R,
) -> Result<StpTrace, PolicyError> {
    match estimator {
        Estimator::Exact { cap } => {
            run_with(tree, path, |k| Ok(threshold_exact(tree, k, tbar, cap)?.value))
        }
        Estimator::MonteCarlo { n_paths } => run_with(tree, path, |k| {
            Ok(threshold_mc(tree, k, tbar, n_paths, rng)?.value)
        }),
    }
}

/// Runs STP along `path` with precomputed thresholds.
pub fn run_stp_with_table(tree: &ScenarioTree, path: &SamplePath, table: &ThresholdTable) -> StpTrace {
    run_with(tree, path, |k| Ok(table.get(k))).expect("table lookups are infallible")
}

/// `V^STP(S_t)` for every node by the backward recursion
/// `V = sum_i p_i 1(r_i >= h) (r_i - E[V']) + E[V']`, with `V(S_{T+1}) = 0`.
pub fn stp_values(tree: &ScenarioTree, table: &ThresholdTable) -> Vec<f64> {
    let mut v = vec![0.0; tree.len()];
    for k in (0..tree.len()).rev() {
        let cont: f64 = tree
            .children(k)
            .iter()
            .map(|&c| tree.node(c).branch_prob * v[c])
            .sum();
        let node = tree.node(k);
        let h = table.get(k);
        let immediate: f64 = node
            .arrival_probs
            .iter()
            .zip(&node.rewards)
            .filter(|(_, &r)| r >= h)
            .map(|(&p, &r)| p * (r - cont))
            .sum();
        v[k] = immediate + cont;
    }
    v
}

/// `V^STP(S_t)` at node `k` by the backward recursion over its subtree.
pub fn stp_value_recursion(tree: &ScenarioTree, k: usize, tbar: f64, cap: usize) -> Result<f64, PolicyError> {
    if k >= tree.len() {
        return Err(PolicyError::NodeOutOfRange(k));
    }
    tree.ensure_enumerable(k, cap)?;
    fn go(tree: &ScenarioTree, k: usize, tbar: f64, cap: usize) -> Result<f64, PolicyError> {
        let mut cont = 0.0;
        for &c in tree.children(k) {
            cont += tree.node(c).branch_prob * go(tree, c, tbar, cap)?;
        }
        let h = threshold_exact(tree, k, tbar, cap)?.value;
        let node = tree.node(k);
        let immediate: f64 = node
            .arrival_probs
            .iter()
            .zip(&node.rewards)
            .filter(|(_, &r)| r >= h)
            .map(|(&p, &r)| p * (r - cont))
            .sum();
        Ok(immediate + cont)
    }
    go(tree, k, tbar, cap)
}

/// Reward of the clairvoyant seller on one path: the best realized arrival.
pub fn offline_oracle(tree: &ScenarioTree, path: &SamplePath) -> f64 {
    path.nodes
        .iter()
        .zip(&path.arrivals)
        .filter_map(|(&k, a)| a.map(|i| tree.node(k).rewards[i]))
        .fold(0.0, f64::max)
}

/// `E[sum_t sum_i r_it p_it(S_t)]`, the upper bound on the offline value.
pub fn reward_mass_bound(tree: &ScenarioTree, cap: usize) -> Result<f64, PolicyError> {
    tree.ensure_enumerable(tree.root(), cap)?;
    Ok((0..tree.len())
        .map(|k| tree.path_prob(k) * tree.node(k).reward_mass())
        .sum())
}

/// `E[max_t Y_t]` for independent per-period rewards along a fixed node path,
/// where `Y_t = r_it` with probability `p_it` and 0 otherwise.
fn expected_max_along(tree: &ScenarioTree, nodes: &[usize]) -> f64 {
    let mut levels: Vec<f64> = nodes
        .iter()
        .flat_map(|&k| {
            let n = tree.node(k);
            n.rewards
                .iter()
                .zip(&n.arrival_probs)
                .filter(|(&r, &p)| r > 0.0 && p > 0.0)
                .map(|(&r, _)| r)
                .collect::<Vec<_>>()
        })
        .collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    // E[M] = sum_k (v_k - v_{k-1}) P(M >= v_k)
    let mut prev = 0.0;
    let mut total = 0.0;
    for &v in &levels {
        let below: f64 = nodes
            .iter()
            .map(|&k| {
                let n = tree.node(k);
                let hit: f64 = n
                    .rewards
                    .iter()
                    .zip(&n.arrival_probs)
                    .filter(|(&r, _)| r >= v)
                    .map(|(_, &p)| p)
                    .sum();
                (1.0 - hit).max(0.0)
            })
            .product();
        total += (v - prev) * (1.0 - below);
        prev = v;
    }
    total
}

/// Exact `E[V^OFF]` over all sample paths and arrival outcomes.
pub fn expected_offline_value(tree: &ScenarioTree, cap: usize) -> Result<f64, PolicyError> {
    let paths = crate::scenario::enumerate_paths(tree, cap)?;
    Ok(paths
        .iter()
        .map(|pw| pw.probability * expected_max_along(tree, &pw.nodes))
        .sum())
}
