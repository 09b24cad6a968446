//! Scenario trees for the exogenous information process and customer arrivals.
//!
//! Each node of a [`ScenarioTree`] is one realization of `S_t`; its children
//! are the realizations of `S_{t+1}` given it. Arrivals within a period are
//! drawn from a single uniform `u_t`, so at most one customer arrives per
//! period.

mod generate;
mod tree;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use generate::{random_tree, random_unit_mass_tree, RandomTreeParams};
pub use tree::{
    build_tree, NodeId, NodeSpec, ScenarioNode, ScenarioTree, TreeError, TreeSpec,
    DEFAULT_ENUMERATION_CAP, PROB_TOL,
};

/// Type index `i` with `u` in `[sum_{k<i} p_k, sum_{k<=i} p_k)`, or `None`
/// when `u` lies beyond the total mass.
pub fn sample_arrival(probs: &[f64], u: f64) -> Option<usize> {
    let mut lo = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        let hi = lo + p;
        if u >= lo && u < hi {
            return Some(i);
        }
        lo = hi;
    }
    None
}

/// One realized trajectory `(S_0, ..., S_T)` with its arrivals.
///
/// All vectors are indexed by period: entry 0 is the dummy root, which never
/// has an arrival (its uniform is recorded as 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub nodes: Vec<usize>,
    pub arrivals: Vec<Option<usize>>,
    pub uniforms: Vec<f64>,
}

impl SamplePath {
    pub fn horizon(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Builds a path over a fixed node sequence with explicit arrivals.
    pub fn with_arrivals(nodes: Vec<usize>, arrivals: Vec<Option<usize>>) -> Self {
        assert_eq!(nodes.len(), arrivals.len(), "one arrival slot per period");
        let uniforms = vec![0.0; nodes.len()];
        Self {
            nodes,
            arrivals,
            uniforms,
        }
    }

    /// External ids of the visited nodes.
    pub fn node_ids(&self, tree: &ScenarioTree) -> Vec<NodeId> {
        self.nodes.iter().map(|&k| tree.node(k).id).collect()
    }
}

/// A root-to-leaf node sequence and its probability.
#[derive(Debug, Clone, PartialEq)]
pub struct PathWeight {
    pub nodes: Vec<usize>,
    pub probability: f64,
}

fn pick_child<R: Rng + ?Sized>(tree: &ScenarioTree, k: usize, rng: &mut R) -> usize {
    let kids = tree.children(k);
    if kids.len() == 1 {
        // still consume a draw so the stream layout does not depend on shape
        let _: f64 = rng.random();
        return kids[0];
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = kids[0];
    for &c in kids {
        let bp = tree.node(c).branch_prob;
        if bp > 0.0 {
            last_positive = c;
        }
        acc += bp;
        if u < acc {
            return c;
        }
    }
    // u landed in the rounding gap below 1
    last_positive
}

/// Walks from node `k` to a leaf, choosing children by branch probability.
/// Returns the visited nodes after `k`.
pub fn sample_continuation<R: Rng + ?Sized>(
    tree: &ScenarioTree,
    k: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut out = Vec::with_capacity(tree.horizon() - tree.node(k).period);
    let mut cur = k;
    while !tree.is_leaf(cur) {
        cur = pick_child(tree, cur, rng);
        out.push(cur);
    }
    out
}

/// Samples a full trajectory. Per period, one uniform picks the child and a
/// second one is `u_t` for the arrival.
pub fn sample_path<R: Rng + ?Sized>(tree: &ScenarioTree, rng: &mut R) -> SamplePath {
    let t_max = tree.horizon();
    let mut nodes = Vec::with_capacity(t_max + 1);
    let mut arrivals = Vec::with_capacity(t_max + 1);
    let mut uniforms = Vec::with_capacity(t_max + 1);
    let mut cur = tree.root();
    nodes.push(cur);
    arrivals.push(None);
    uniforms.push(0.0);
    while !tree.is_leaf(cur) {
        cur = pick_child(tree, cur, rng);
        let u: f64 = rng.random();
        nodes.push(cur);
        arrivals.push(tree.node(cur).sample_arrival(u));
        uniforms.push(u);
    }
    SamplePath {
        nodes,
        arrivals,
        uniforms,
    }
}

/// All root-to-leaf paths with their probabilities.
pub fn enumerate_paths(tree: &ScenarioTree, cap: usize) -> Result<Vec<PathWeight>, TreeError> {
    tree.ensure_enumerable(tree.root(), cap)?;
    let mut out = Vec::new();
    let mut stack = vec![(vec![tree.root()], 1.0)];
    while let Some((path, prob)) = stack.pop() {
        let last = *path.last().expect("non-empty path");
        let kids = tree.children(last);
        if kids.is_empty() {
            out.push(PathWeight {
                nodes: path,
                probability: prob,
            });
            continue;
        }
        for &c in kids.iter().rev() {
            let mut next = path.clone();
            next.push(c);
            stack.push((next, prob * tree.node(c).branch_prob));
        }
    }
    Ok(out)
}

/// `max` over leaves of the path mass `sum_t sum_i p_it(S_t)`: the tightest
/// valid uniform upper bound on expected arrivals per sample path.
pub fn tbar_upper_bound(tree: &ScenarioTree) -> f64 {
    tree.leaves()
        .map(|k| tree.cumulative_mass(k))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::SimRng;
    use rand::SeedableRng;

    fn two_level(bp1: (f64, f64), bp2: (f64, f64)) -> ScenarioTree {
        let mut nodes = vec![NodeSpec {
            id: 0,
            parent: None,
            branch_prob: 1.0,
            arrival_probs: vec![],
            rewards: vec![],
        }];
        let mut next = 1;
        for (k, bp) in [bp1.0, bp1.1].into_iter().enumerate() {
            let id = next;
            next += 1;
            nodes.push(NodeSpec {
                id,
                parent: Some(0),
                branch_prob: bp,
                arrival_probs: vec![0.2 + 0.1 * k as f64],
                rewards: vec![1.0],
            });
            for bq in [bp2.0, bp2.1] {
                nodes.push(NodeSpec {
                    id: next,
                    parent: Some(id),
                    branch_prob: bq,
                    arrival_probs: vec![0.3],
                    rewards: vec![2.0],
                });
                next += 1;
            }
        }
        build_tree(&TreeSpec {
            horizon: 2,
            num_types: 1,
            nodes,
        })
        .unwrap()
    }

    #[test]
    fn arrival_interval_membership() {
        assert_eq!(sample_arrival(&[0.3, 0.4], 0.5), Some(1));
        assert_eq!(sample_arrival(&[0.3, 0.4], 0.9), None);
        assert_eq!(sample_arrival(&[1.0], 0.0), Some(0));
        assert_eq!(sample_arrival(&[0.3, 0.4], 0.3), Some(1));
        assert_eq!(sample_arrival(&[0.0, 0.4], 0.0), Some(1));
        assert_eq!(sample_arrival(&[], 0.0), None);
    }

    #[test]
    fn chain_path_visits_the_chain() {
        let tree = ScenarioTree::chain(1, &[(vec![1.0], vec![5.0])]).unwrap();
        let mut rng = SimRng::seed_from_u64(3);
        let path = sample_path(&tree, &mut rng);
        assert_eq!(path.nodes, vec![0, 1]);
        assert_eq!(path.arrivals, vec![None, Some(0)]);
    }

    #[test]
    fn sampling_is_deterministic_given_seed() {
        let tree = two_level((0.5, 0.5), (0.25, 0.75));
        let a = sample_path(&tree, &mut SimRng::seed_from_u64(11));
        let b = sample_path(&tree, &mut SimRng::seed_from_u64(11));
        assert_eq!(a, b);
    }

    #[test]
    fn branch_frequency_follows_branch_probs() {
        let tree = two_level((0.5, 0.5), (0.5, 0.5));
        let mut rng = SimRng::seed_from_u64(2024);
        let n = 100_000;
        let first = tree.children(0)[0];
        let hits = (0..n)
            .filter(|_| sample_path(&tree, &mut rng).nodes[1] == first)
            .count();
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.01, "frequency {freq}");
    }

    #[test]
    fn enumerates_product_probabilities() {
        let chain = ScenarioTree::chain(1, &[(vec![0.5], vec![1.0])]).unwrap();
        let paths = enumerate_paths(&chain, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].probability, 1.0);

        let tree = two_level((0.3, 0.7), (0.5, 0.5));
        let mut probs: Vec<f64> = enumerate_paths(&tree, DEFAULT_ENUMERATION_CAP)
            .unwrap()
            .iter()
            .map(|p| p.probability)
            .collect();
        probs.sort_by(f64::total_cmp);
        let expected = [0.15, 0.15, 0.35, 0.35];
        for (p, e) in probs.iter().zip(expected) {
            assert!((p - e).abs() < 1e-12);
        }
        assert!(matches!(
            enumerate_paths(&tree, 3),
            Err(TreeError::TooLarge { leaves: 4, cap: 3 })
        ));
    }

    #[test]
    fn tbar_is_max_over_leaves() {
        let chain =
            ScenarioTree::chain(1, &[(vec![0.5], vec![1.0]), (vec![0.5], vec![2.0])]).unwrap();
        assert_eq!(tbar_upper_bound(&chain), 1.0);

        // two leaves with path masses 0.8 and 1.0
        let spec = TreeSpec {
            horizon: 1,
            num_types: 1,
            nodes: vec![
                NodeSpec {
                    id: 0,
                    parent: None,
                    branch_prob: 1.0,
                    arrival_probs: vec![],
                    rewards: vec![],
                },
                NodeSpec {
                    id: 1,
                    parent: Some(0),
                    branch_prob: 0.5,
                    arrival_probs: vec![0.8],
                    rewards: vec![1.0],
                },
                NodeSpec {
                    id: 2,
                    parent: Some(0),
                    branch_prob: 0.5,
                    arrival_probs: vec![1.0],
                    rewards: vec![1.0],
                },
            ],
        };
        assert_eq!(tbar_upper_bound(&build_tree(&spec).unwrap()), 1.0);

        let zero = ScenarioTree::chain(2, &[(vec![0.0, 0.0], vec![1.0, 1.0])]).unwrap();
        assert_eq!(tbar_upper_bound(&zero), 0.0);
    }
}
