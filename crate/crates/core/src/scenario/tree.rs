use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Tolerance for probability-sum validation. Inputs outside it are rejected,
/// never renormalized.
pub const PROB_TOL: f64 = 1e-12;

/// Default cap on the number of leaves an exact enumeration may visit.
pub const DEFAULT_ENUMERATION_CAP: usize = 1_000_000;

/// External node identifier as it appears in tree files.
pub type NodeId = u64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TreeError {
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("num_types must be at least 1")]
    ZeroTypes,
    #[error("duplicate node id {0}")]
    DuplicateId(NodeId),
    #[error("node {node}: unknown parent {parent}")]
    UnknownParent { node: NodeId, parent: NodeId },
    #[error("no root node (exactly one node must have parent null)")]
    NoRoot,
    #[error("multiple root nodes: {0:?}")]
    MultipleRoots(Vec<NodeId>),
    #[error("node {0} is not reachable from the root (cycle in parent links)")]
    Unreachable(NodeId),
    #[error("node {node}: expected {expected} entries in `{field}`, found {found}")]
    WrongArity {
        node: NodeId,
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("node {node}: non-finite value in `{field}`")]
    NonFinite { node: NodeId, field: &'static str },
    #[error("node {node}: probability {value} outside [0, 1]")]
    ProbabilityOutOfRange { node: NodeId, value: f64 },
    #[error("node {node}: arrival probabilities exceed 1 (sum {})", rounded(.sum))]
    ArrivalMassExceeded { node: NodeId, sum: f64 },
    #[error("node {node}: branch probabilities sum {} \u{2260} 1", rounded(.sum))]
    BranchSum { node: NodeId, sum: f64 },
    #[error("node {node}: reward {value} is negative")]
    NegativeReward { node: NodeId, value: f64 },
    #[error("root node {0} must have zero arrival probabilities")]
    RootHasArrivals(NodeId),
    #[error("root node {node} must have branch_prob 1, found {value}")]
    RootBranchProb { node: NodeId, value: f64 },
    #[error("node {node}: depth {depth} inconsistent with horizon {horizon}")]
    DepthMismatch {
        node: NodeId,
        depth: usize,
        horizon: usize,
    },
    #[error("tree too large for enumeration ({leaves} leaves > cap {cap})")]
    TooLarge { leaves: usize, cap: usize },
}

/// Sums in messages are shown rounded so `0.3 + 0.6` reads as `0.9`.
fn rounded(x: &f64) -> f64 {
    (x * 1e12).round() / 1e12
}

impl TreeError {
    /// Node the error refers to, when there is one.
    pub fn node(&self) -> Option<NodeId> {
        use TreeError::*;
        match self {
            DuplicateId(n) | Unreachable(n) | RootHasArrivals(n) => Some(*n),
            UnknownParent { node, .. }
            | WrongArity { node, .. }
            | NonFinite { node, .. }
            | ProbabilityOutOfRange { node, .. }
            | ArrivalMassExceeded { node, .. }
            | BranchSum { node, .. }
            | NegativeReward { node, .. }
            | RootBranchProb { node, .. }
            | DepthMismatch { node, .. } => Some(*node),
            ZeroHorizon | ZeroTypes | NoRoot | MultipleRoots(_) | TooLarge { .. } => None,
        }
    }
}

fn one() -> f64 {
    1.0
}

/// One node as written in a tree file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    #[serde(default = "one")]
    pub branch_prob: f64,
    /// Arrival probabilities `p_i` per customer type. May be empty for the root.
    #[serde(default, rename = "p")]
    pub arrival_probs: Vec<f64>,
    /// Rewards `r_i` per customer type. May be empty for the root.
    #[serde(default, rename = "r")]
    pub rewards: Vec<f64>,
}

/// Serialized form of a scenario tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSpec {
    pub horizon: usize,
    pub num_types: usize,
    pub nodes: Vec<NodeSpec>,
}

/// A validated node of the exogenous process: one realization of `S_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioNode {
    pub id: NodeId,
    /// Index of the parent in [`ScenarioTree::nodes`].
    pub parent: Option<usize>,
    /// 0 for the dummy root, `1..=T` otherwise.
    pub period: usize,
    pub branch_prob: f64,
    pub arrival_probs: Vec<f64>,
    pub rewards: Vec<f64>,
}

impl ScenarioNode {
    /// Total arrival probability `sum_i p_i` in this node.
    pub fn arrival_mass(&self) -> f64 {
        self.arrival_probs.iter().sum()
    }

    /// Expected reward `sum_i r_i p_i` if every arrival were served.
    pub fn reward_mass(&self) -> f64 {
        self.arrival_probs
            .iter()
            .zip(&self.rewards)
            .map(|(p, r)| p * r)
            .sum()
    }

    pub fn sample_arrival(&self, u: f64) -> Option<usize> {
        super::sample_arrival(&self.arrival_probs, u)
    }
}

/// Finite tree representation of the process `S_0, S_1, ..., S_T`.
///
/// Nodes are stored in breadth-first order, so the root is index 0, every
/// parent precedes its children, and iterating in reverse is a valid
/// bottom-up pass.
#[derive(Debug, Clone)]
pub struct ScenarioTree {
    nodes: Vec<ScenarioNode>,
    children: Vec<Vec<usize>>,
    horizon: usize,
    num_types: usize,
    path_prob: Vec<f64>,
    cumulative_mass: Vec<f64>,
    index: HashMap<NodeId, usize>,
}

fn check_finite(node: NodeId, field: &'static str, xs: &[f64]) -> Result<(), TreeError> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(TreeError::NonFinite { node, field })
    }
}

/// Validates a [`TreeSpec`] and builds the tree.
pub fn build_tree(spec: &TreeSpec) -> Result<ScenarioTree, TreeError> {
    ScenarioTree::from_spec(spec)
}

impl ScenarioTree {
    pub fn from_spec(spec: &TreeSpec) -> Result<Self, TreeError> {
        if spec.horizon == 0 {
            return Err(TreeError::ZeroHorizon);
        }
        if spec.num_types == 0 {
            return Err(TreeError::ZeroTypes);
        }
        let n_types = spec.num_types;

        let mut by_id: HashMap<NodeId, usize> = HashMap::with_capacity(spec.nodes.len());
        for (k, node) in spec.nodes.iter().enumerate() {
            if by_id.insert(node.id, k).is_some() {
                return Err(TreeError::DuplicateId(node.id));
            }
        }

        let roots: Vec<NodeId> = spec
            .nodes
            .iter()
            .filter(|n| n.parent.is_none())
            .map(|n| n.id)
            .collect();
        let root_spec = match roots.as_slice() {
            [] => return Err(TreeError::NoRoot),
            [r] => by_id[r],
            _ => return Err(TreeError::MultipleRoots(roots)),
        };

        let mut spec_children: Vec<Vec<usize>> = vec![Vec::new(); spec.nodes.len()];
        for (k, node) in spec.nodes.iter().enumerate() {
            if let Some(parent) = node.parent {
                let &pk = by_id.get(&parent).ok_or(TreeError::UnknownParent {
                    node: node.id,
                    parent,
                })?;
                spec_children[pk].push(k);
            }
        }

        // Breadth-first relabelling; anything not reached sits on a cycle.
        let mut order = Vec::with_capacity(spec.nodes.len());
        let mut depth = vec![usize::MAX; spec.nodes.len()];
        depth[root_spec] = 0;
        order.push(root_spec);
        let mut head = 0;
        while head < order.len() {
            let k = order[head];
            head += 1;
            for &c in &spec_children[k] {
                depth[c] = depth[k] + 1;
                if depth[c] > spec.horizon {
                    return Err(TreeError::DepthMismatch {
                        node: spec.nodes[c].id,
                        depth: depth[c],
                        horizon: spec.horizon,
                    });
                }
                order.push(c);
            }
        }
        if order.len() != spec.nodes.len() {
            let missing = (0..spec.nodes.len())
                .find(|&k| depth[k] == usize::MAX)
                .expect("some node unreached");
            return Err(TreeError::Unreachable(spec.nodes[missing].id));
        }

        let mut new_index = vec![0usize; spec.nodes.len()];
        for (new, &old) in order.iter().enumerate() {
            new_index[old] = new;
        }

        let mut nodes = Vec::with_capacity(order.len());
        let mut children = vec![Vec::new(); order.len()];
        for &old in &order {
            let s = &spec.nodes[old];
            let is_root = s.parent.is_none();
            check_finite(s.id, "branch_prob", &[s.branch_prob])?;
            check_finite(s.id, "p", &s.arrival_probs)?;
            check_finite(s.id, "r", &s.rewards)?;

            let mut p = s.arrival_probs.clone();
            let mut r = s.rewards.clone();
            if is_root {
                if p.iter().any(|&x| x != 0.0) {
                    return Err(TreeError::RootHasArrivals(s.id));
                }
                if (s.branch_prob - 1.0).abs() > PROB_TOL {
                    return Err(TreeError::RootBranchProb {
                        node: s.id,
                        value: s.branch_prob,
                    });
                }
                p.resize(n_types, 0.0);
                r.resize(n_types, 0.0);
            }
            if p.len() != n_types {
                return Err(TreeError::WrongArity {
                    node: s.id,
                    field: "p",
                    expected: n_types,
                    found: p.len(),
                });
            }
            if r.len() != n_types {
                return Err(TreeError::WrongArity {
                    node: s.id,
                    field: "r",
                    expected: n_types,
                    found: r.len(),
                });
            }
            for &x in p.iter().chain(std::iter::once(&s.branch_prob)) {
                if !(0.0..=1.0).contains(&x) {
                    return Err(TreeError::ProbabilityOutOfRange { node: s.id, value: x });
                }
            }
            let mass: f64 = p.iter().sum();
            if mass > 1.0 + PROB_TOL {
                return Err(TreeError::ArrivalMassExceeded { node: s.id, sum: mass });
            }
            if let Some(&bad) = r.iter().find(|&&x| x < 0.0) {
                return Err(TreeError::NegativeReward {
                    node: s.id,
                    value: bad,
                });
            }

            let kids: Vec<usize> = spec_children[old].iter().map(|&c| new_index[c]).collect();
            if kids.is_empty() {
                if depth[old] != spec.horizon {
                    return Err(TreeError::DepthMismatch {
                        node: s.id,
                        depth: depth[old],
                        horizon: spec.horizon,
                    });
                }
            } else {
                let sum: f64 = spec_children[old]
                    .iter()
                    .map(|&c| spec.nodes[c].branch_prob)
                    .sum();
                if (sum - 1.0).abs() > PROB_TOL {
                    return Err(TreeError::BranchSum { node: s.id, sum });
                }
            }
            let new = new_index[old];
            children[new] = kids;
            nodes.push(ScenarioNode {
                id: s.id,
                parent: s.parent.map(|pid| new_index[by_id[&pid]]),
                period: depth[old],
                branch_prob: s.branch_prob,
                arrival_probs: p,
                rewards: r,
            });
        }

        let mut path_prob = vec![1.0; nodes.len()];
        let mut cumulative_mass = vec![0.0; nodes.len()];
        for k in 1..nodes.len() {
            let parent = nodes[k].parent.expect("non-root has parent");
            path_prob[k] = path_prob[parent] * nodes[k].branch_prob;
            cumulative_mass[k] = cumulative_mass[parent] + nodes[k].arrival_mass();
        }
        let index = nodes.iter().enumerate().map(|(k, n)| (n.id, k)).collect();

        Ok(Self {
            nodes,
            children,
            horizon: spec.horizon,
            num_types: n_types,
            path_prob,
            cumulative_mass,
            index,
        })
    }

    /// Builds a chain tree (no branching) from per-period `(p, r)` rows.
    pub fn chain(num_types: usize, periods: &[(Vec<f64>, Vec<f64>)]) -> Result<Self, TreeError> {
        let mut nodes = vec![NodeSpec {
            id: 0,
            parent: None,
            branch_prob: 1.0,
            arrival_probs: vec![],
            rewards: vec![],
        }];
        for (t, (p, r)) in periods.iter().enumerate() {
            nodes.push(NodeSpec {
                id: t as NodeId + 1,
                parent: Some(t as NodeId),
                branch_prob: 1.0,
                arrival_probs: p.clone(),
                rewards: r.clone(),
            });
        }
        Self::from_spec(&TreeSpec {
            horizon: periods.len(),
            num_types,
            nodes,
        })
    }

    pub fn to_spec(&self) -> TreeSpec {
        TreeSpec {
            horizon: self.horizon,
            num_types: self.num_types,
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeSpec {
                    id: n.id,
                    parent: n.parent.map(|p| self.nodes[p].id),
                    branch_prob: n.branch_prob,
                    arrival_probs: n.arrival_probs.clone(),
                    rewards: n.rewards.clone(),
                })
                .collect(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_types(&self) -> usize {
        self.num_types
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub const fn root(&self) -> usize {
        0
    }

    pub fn nodes(&self) -> &[ScenarioNode] {
        &self.nodes
    }

    pub fn node(&self, k: usize) -> &ScenarioNode {
        &self.nodes[k]
    }

    pub fn children(&self, k: usize) -> &[usize] {
        &self.children[k]
    }

    pub fn is_leaf(&self, k: usize) -> bool {
        self.children[k].is_empty()
    }

    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    /// Unconditional probability of reaching node `k`.
    pub fn path_prob(&self, k: usize) -> f64 {
        self.path_prob[k]
    }

    /// Realized mass `sum_{t' <= t} sum_i p_it'(S_t')` along the path to `k`.
    pub fn cumulative_mass(&self, k: usize) -> f64 {
        self.cumulative_mass[k]
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(move |&k| self.children[k].is_empty())
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves().count()
    }

    /// Leaves in the subtree rooted at `k`.
    pub fn subtree_leaves(&self, k: usize) -> usize {
        let mut stack = vec![k];
        let mut count = 0;
        while let Some(n) = stack.pop() {
            if self.children[n].is_empty() {
                count += 1;
            } else {
                stack.extend_from_slice(&self.children[n]);
            }
        }
        count
    }

    /// Errors with [`TreeError::TooLarge`] when the subtree at `k` has more
    /// than `cap` leaves.
    pub fn ensure_enumerable(&self, k: usize, cap: usize) -> Result<(), TreeError> {
        let leaves = self.subtree_leaves(k);
        if leaves > cap {
            Err(TreeError::TooLarge { leaves, cap })
        } else {
            Ok(())
        }
    }

    /// Node indices from the root down to `k`, inclusive.
    pub fn path_to(&self, k: usize) -> Vec<usize> {
        let mut path = vec![k];
        let mut cur = k;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }
}

impl fmt::Display for ScenarioTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ScenarioTree(T={}, I={}, nodes={}, leaves={})",
            self.horizon,
            self.num_types,
            self.nodes.len(),
            self.num_leaves()
        )
    }
}
