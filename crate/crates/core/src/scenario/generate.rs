//! Random scenario trees for property sweeps.

use rand::Rng;

use super::tree::{build_tree, NodeId, NodeSpec, ScenarioTree, TreeSpec};

#[derive(Debug, Clone, Copy)]
pub struct RandomTreeParams {
    /// Horizon is drawn uniformly from `1..=max_horizon`.
    pub max_horizon: usize,
    /// Each internal node gets `1..=max_branches` children.
    pub max_branches: usize,
    /// Number of customer types is drawn from `1..=max_types`.
    pub max_types: usize,
    /// Rewards are drawn from `[0, max_reward)`.
    pub max_reward: f64,
    /// Chance that a given arrival probability is forced to zero.
    pub zero_prob_chance: f64,
}

impl Default for RandomTreeParams {
    fn default() -> Self {
        Self {
            max_horizon: 5,
            max_branches: 3,
            max_types: 3,
            max_reward: 10.0,
            zero_prob_chance: 0.2,
        }
    }
}

fn branch_probs<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Splits `mass` over `n` types with random weights, zeroing some entries.
fn split_mass<R: Rng + ?Sized>(mass: f64, n: usize, zero_chance: f64, rng: &mut R) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n)
        .map(|_| {
            if rng.random::<f64>() < zero_chance {
                0.0
            } else {
                rng.random::<f64>()
            }
        })
        .collect();
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        w[0] = 1.0;
        w[1..].iter_mut().for_each(|x| *x = 0.0);
        return w.into_iter().map(|x| x * mass).collect();
    }
    w.into_iter().map(|x| mass * x / total).collect()
}

struct Builder<'a, R: ?Sized> {
    params: &'a RandomTreeParams,
    horizon: usize,
    types: usize,
    nodes: Vec<NodeSpec>,
    rng: &'a mut R,
}

impl<R: Rng + ?Sized> Builder<'_, R> {
    fn push(&mut self, parent: Option<NodeId>, bp: f64, p: Vec<f64>) -> NodeId {
        let id = self.nodes.len() as NodeId;
        let r = if parent.is_none() {
            vec![]
        } else {
            (0..self.types)
                .map(|_| self.rng.random::<f64>() * self.params.max_reward)
                .collect()
        };
        self.nodes.push(NodeSpec {
            id,
            parent,
            branch_prob: bp,
            arrival_probs: p,
            rewards: r,
        });
        id
    }

    fn n_children(&mut self) -> usize {
        self.rng.random_range(1..=self.params.max_branches.max(1))
    }

    /// Unconstrained masses: each period row has total mass uniform in [0, 1].
    fn grow_free(&mut self, parent: NodeId, depth: usize) {
        if depth == self.horizon {
            return;
        }
        let n = self.n_children();
        for bp in branch_probs(n, self.rng) {
            let mass: f64 = self.rng.random();
            let p = split_mass(mass, self.types, self.params.zero_prob_chance, self.rng);
            let id = self.push(Some(parent), bp, p);
            self.grow_free(id, depth + 1);
        }
    }

    /// Every path accumulates mass exactly `1 - used` by the horizon.
    fn grow_unit(&mut self, parent: NodeId, depth: usize, used: f64, children: usize) {
        if depth == self.horizon {
            return;
        }
        for bp in branch_probs(children, self.rng) {
            let remaining = (1.0 - used).max(0.0);
            let mass = if depth + 1 == self.horizon {
                remaining
            } else if self.rng.random::<f64>() < self.params.zero_prob_chance {
                0.0
            } else {
                remaining * self.rng.random::<f64>()
            };
            let p = split_mass(mass, self.types, self.params.zero_prob_chance, self.rng);
            let row_mass: f64 = p.iter().sum();
            let id = self.push(Some(parent), bp, p);
            let k = self.n_children();
            self.grow_unit(id, depth + 1, used + row_mass, k);
        }
    }
}

/// Random valid tree with arbitrary path masses.
pub fn random_tree<R: Rng + ?Sized>(params: &RandomTreeParams, rng: &mut R) -> ScenarioTree {
    let horizon = rng.random_range(1..=params.max_horizon.max(1));
    let types = rng.random_range(1..=params.max_types.max(1));
    let mut b = Builder {
        params,
        horizon,
        types,
        nodes: Vec::new(),
        rng,
    };
    let root = b.push(None, 1.0, vec![]);
    b.grow_free(root, 0);
    build_tree(&TreeSpec {
        horizon,
        num_types: types,
        nodes: b.nodes,
    })
    .expect("generator produces valid trees")
}

/// Random tree whose every sample path has total arrival mass 1 and whose
/// first period is deterministic (the root has a single child).
pub fn random_unit_mass_tree<R: Rng + ?Sized>(
    params: &RandomTreeParams,
    rng: &mut R,
) -> ScenarioTree {
    let horizon = rng.random_range(1..=params.max_horizon.max(1));
    let types = rng.random_range(1..=params.max_types.max(1));
    let mut b = Builder {
        params,
        horizon,
        types,
        nodes: Vec::new(),
        rng,
    };
    let root = b.push(None, 1.0, vec![]);
    b.grow_unit(root, 0, 0.0, 1);
    build_tree(&TreeSpec {
        horizon,
        num_types: types,
        nodes: b.nodes,
    })
    .expect("generator produces valid trees")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{enumerate_paths, tbar_upper_bound, DEFAULT_ENUMERATION_CAP};
    use crate::seed::SimRng;
    use rand::SeedableRng;

    #[test]
    fn random_trees_are_valid_and_enumerable() {
        let mut rng = SimRng::seed_from_u64(5);
        for _ in 0..100 {
            let tree = random_tree(&RandomTreeParams::default(), &mut rng);
            assert!(tree.horizon() <= 5 && tree.num_types() <= 3);
            let total: f64 = enumerate_paths(&tree, DEFAULT_ENUMERATION_CAP)
                .unwrap()
                .iter()
                .map(|p| p.probability)
                .sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_mass_trees_have_unit_path_mass() {
        let mut rng = SimRng::seed_from_u64(6);
        for _ in 0..100 {
            let tree = random_unit_mass_tree(&RandomTreeParams::default(), &mut rng);
            assert_eq!(tree.children(tree.root()).len(), 1);
            for leaf in tree.leaves() {
                assert!((tree.cumulative_mass(leaf) - 1.0).abs() < 1e-12);
            }
            assert!((tbar_upper_bound(&tree) - 1.0).abs() < 1e-12);
        }
    }
}
