use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{PolicyError, BOUND_TOL};
use crate::scenario::{sample_continuation, tbar_upper_bound, ScenarioTree};
use crate::stats::Welford;

/// Estimate of the selling threshold `h(S_t)` at one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    pub value: f64,
    /// Monte Carlo standard error; 0 for exact values.
    pub stderr: f64,
    /// Inner simulation count; 0 for exact values.
    pub n_paths: usize,
}

impl ThresholdEstimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            stderr: 0.0,
            n_paths: 0,
        }
    }
}

/// `1 + tbar - realized past mass`. The upper-bound precondition keeps it at
/// least 1.
fn denominator(tree: &ScenarioTree, k: usize, tbar: f64) -> f64 {
    1.0 + tbar - tree.cumulative_mass(k)
}

fn max_leaf_mass_under(tree: &ScenarioTree, k: usize) -> f64 {
    let mut stack = vec![k];
    let mut best = 0.0f64;
    while let Some(n) = stack.pop() {
        if tree.is_leaf(n) {
            best = best.max(tree.cumulative_mass(n));
        } else {
            stack.extend_from_slice(tree.children(n));
        }
    }
    best
}

fn check_bound(tbar: f64, required: f64) -> Result<(), PolicyError> {
    if !tbar.is_finite() || tbar < required - BOUND_TOL {
        Err(PolicyError::InvalidUpperBound { tbar, required })
    } else {
        Ok(())
    }
}

/// `E[sum_{t' > t} sum_i r p | S_t]` by recursion over the subtree at `k`.
fn future_reward_mass(tree: &ScenarioTree, k: usize) -> f64 {
    tree.children(k)
        .iter()
        .map(|&c| tree.node(c).branch_prob * (tree.node(c).reward_mass() + future_reward_mass(tree, c)))
        .sum()
}

/// Exact threshold at node `k` by enumerating its subtree.
pub fn threshold_exact(
    tree: &ScenarioTree,
    k: usize,
    tbar: f64,
    cap: usize,
) -> Result<ThresholdEstimate, PolicyError> {
    if k >= tree.len() {
        return Err(PolicyError::NodeOutOfRange(k));
    }
    tree.ensure_enumerable(k, cap)?;
    check_bound(tbar, max_leaf_mass_under(tree, k))?;
    Ok(ThresholdEstimate::exact(
        future_reward_mass(tree, k) / denominator(tree, k, tbar),
    ))
}

/// Monte Carlo threshold at node `k` from `n_paths` sampled continuations.
/// The denominator is known exactly at `k`; only the future reward mass is
/// simulated.
pub fn threshold_mc<R: Rng + ?Sized>(
    tree: &ScenarioTree,
    k: usize,
    tbar: f64,
    n_paths: usize,
    rng: &mut R,
) -> Result<ThresholdEstimate, PolicyError> {
    if k >= tree.len() {
        return Err(PolicyError::NodeOutOfRange(k));
    }
    if n_paths == 0 {
        return Err(PolicyError::InvalidSampleCount(n_paths));
    }
    let denom = denominator(tree, k, tbar);
    let mut acc = Welford::new();
    for _ in 0..n_paths {
        let cont = sample_continuation(tree, k, rng);
        let leaf = cont.last().copied().unwrap_or(k);
        check_bound(tbar, tree.cumulative_mass(leaf))?;
        let future: f64 = cont.iter().map(|&c| tree.node(c).reward_mass()).sum();
        acc.push(future / denom);
    }
    Ok(ThresholdEstimate {
        value: acc.mean(),
        stderr: acc.stderr(),
        n_paths,
    })
}

/// Exact thresholds for every node of a tree, computed in one bottom-up pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTable {
    tbar: f64,
    values: Vec<f64>,
}

impl ThresholdTable {
    pub fn exact(tree: &ScenarioTree, tbar: f64) -> Result<Self, PolicyError> {
        check_bound(tbar, tbar_upper_bound(tree))?;
        let mut future = vec![0.0; tree.len()];
        for k in (0..tree.len()).rev() {
            future[k] = tree
                .children(k)
                .iter()
                .map(|&c| tree.node(c).branch_prob * (tree.node(c).reward_mass() + future[c]))
                .sum();
        }
        let values = (0..tree.len())
            .map(|k| future[k] / denominator(tree, k, tbar))
            .collect();
        Ok(Self { tbar, values })
    }

    /// Arbitrary per-node thresholds, e.g. for negative controls. Values are
    /// indexed like [`ScenarioTree::nodes`].
    pub fn from_values(tree: &ScenarioTree, tbar: f64, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), tree.len(), "one threshold per node");
        Self { tbar, values }
    }

    pub fn tbar(&self) -> f64 {
        self.tbar
    }

    pub fn get(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn set(&mut self, k: usize, value: f64) {
        self.values[k] = value;
    }
}
