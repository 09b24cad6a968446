//! Successive shortest paths with Dijkstra on reduced costs.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use super::{verify_solution, BipartiteLpInstance, FlowError, LpSolution, CAP_EPS};

/// Augmentation stops once the cheapest path no longer gains more than this.
const GAIN_EPS: f64 = 1e-12;

/// Minimum improvement for a label update in the dual pass.
const RELAX_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
struct Arc {
    to: usize,
    cap: f64,
    cost: f64,
}

struct Network {
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
}

impl Network {
    fn new(n: usize) -> Self {
        Self {
            arcs: Vec::new(),
            adj: vec![Vec::new(); n],
        }
    }

    /// Adds `from -> to` and its zero-capacity reverse; returns the forward index.
    fn add(&mut self, from: usize, to: usize, cap: f64, cost: f64) -> usize {
        let idx = self.arcs.len();
        self.arcs.push(Arc { to, cap, cost });
        self.arcs.push(Arc {
            to: from,
            cap: 0.0,
            cost: -cost,
        });
        self.adj[from].push(idx);
        self.adj[to].push(idx + 1);
        idx
    }

    fn from(&self, a: usize) -> usize {
        self.arcs[a ^ 1].to
    }

    fn push(&mut self, a: usize, amount: f64) {
        self.arcs[a].cap -= amount;
        if self.arcs[a].cap < CAP_EPS {
            self.arcs[a].cap = 0.0;
        }
        self.arcs[a ^ 1].cap += amount;
    }
}

#[derive(PartialEq)]
struct Entry {
    dist: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, then lowest node index
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest reduced-cost distances from `src`; returns distances and the
/// arc used to reach each node.
fn dijkstra(net: &Network, pot: &[f64], src: usize) -> (Vec<f64>, Vec<Option<usize>>) {
    let n = net.adj.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut via = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(Entry { dist: 0.0, node: src });
    while let Some(Entry { dist: d, node: u }) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &a in &net.adj[u] {
            let arc = net.arcs[a];
            if arc.cap <= 0.0 || done[arc.to] {
                continue;
            }
            let reduced = (arc.cost + pot[u] - pot[arc.to]).max(0.0);
            let nd = d + reduced;
            if nd < dist[arc.to] {
                dist[arc.to] = nd;
                via[arc.to] = Some(a);
                heap.push(Entry { dist: nd, node: arc.to });
            }
        }
    }
    (dist, via)
}

/// Initial potentials for the acyclic starting network (source -> demand ->
/// supply -> sink): every arc with capacity has non-negative reduced cost.
fn initial_potentials(net: &Network, n_demand: usize, n_supply: usize) -> Vec<f64> {
    let n = net.adj.len();
    let sink = n - 1;
    let mut pot = vec![0.0; n];
    for s in 0..n_supply {
        let node = 1 + n_demand + s;
        pot[node] = net.adj[node]
            .iter()
            .filter(|&&a| a % 2 == 1 && net.arcs[a ^ 1].cap > 0.0)
            .map(|&a| net.arcs[a ^ 1].cost)
            .fold(0.0, f64::min);
    }
    pot[sink] = (0..n_supply).map(|s| pot[1 + n_demand + s]).fold(0.0, f64::min);
    pot
}

/// Labels `D` with `D(to) <= D(from) + cost` on every residual arc, from a
/// virtual source joined to every node at cost 0.
fn dual_labels(net: &Network) -> Result<Vec<f64>, FlowError> {
    let n = net.adj.len();
    let mut label = vec![0.0; n];
    let mut queued = vec![true; n];
    let mut queue: VecDeque<usize> = (0..n).collect();
    let mut pops = 0usize;
    let limit = n.saturating_mul(net.arcs.len()).max(1_000);
    while let Some(u) = queue.pop_front() {
        queued[u] = false;
        pops += 1;
        if pops > limit {
            return Err(FlowError::NonConvergence(format!(
                "dual labelling exceeded {limit} relaxation rounds"
            )));
        }
        for &a in &net.adj[u] {
            let arc = net.arcs[a];
            if arc.cap <= 0.0 {
                continue;
            }
            let cand = label[u] + arc.cost;
            if cand < label[arc.to] - RELAX_EPS {
                label[arc.to] = cand;
                if !queued[arc.to] {
                    queued[arc.to] = true;
                    queue.push_back(arc.to);
                }
            }
        }
    }
    Ok(label)
}

/// Solves the instance to optimality and attaches dual prices and residuals.
pub fn solve(inst: &BipartiteLpInstance) -> Result<LpSolution, FlowError> {
    inst.validate()?;
    let nd = inst.demand.len();
    let ns = inst.supply.len();
    let source = 0;
    let sink = nd + ns + 1;
    let mut net = Network::new(nd + ns + 2);
    for (d, &cap) in inst.demand_caps.iter().enumerate() {
        net.add(source, 1 + d, cap, 0.0);
    }
    let edge_arcs: Vec<usize> = inst
        .edges
        .iter()
        .map(|e| net.add(1 + e.demand, 1 + nd + e.supply, e.cap, -e.reward))
        .collect();
    for (s, &cap) in inst.supply_caps.iter().enumerate() {
        net.add(1 + nd + s, sink, cap, 0.0);
    }

    let mut pot = initial_potentials(&net, nd, ns);
    loop {
        let (dist, via) = dijkstra(&net, &pot, source);
        if !dist[sink].is_finite() {
            break;
        }
        let path_cost = dist[sink] + pot[sink] - pot[source];
        if path_cost >= -GAIN_EPS {
            break;
        }
        let reach_max = dist.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max);
        for (p, d) in pot.iter_mut().zip(&dist) {
            *p += if d.is_finite() { *d } else { reach_max };
        }
        let mut bottleneck = f64::INFINITY;
        let mut v = sink;
        while let Some(a) = via[v] {
            bottleneck = bottleneck.min(net.arcs[a].cap);
            v = net.from(a);
        }
        if !(bottleneck > 0.0 && bottleneck.is_finite()) {
            return Err(FlowError::NonConvergence(format!("degenerate augmentation {bottleneck}")));
        }
        let mut v = sink;
        while let Some(a) = via[v] {
            net.push(a, bottleneck);
            v = net.from(a);
        }
    }

    let flows: Vec<f64> = edge_arcs.iter().map(|&a| net.arcs[a ^ 1].cap).collect();
    let objective = inst.edges.iter().zip(&flows).fold(0.0, |acc, (e, x)| acc + e.reward * x);

    // joining source and sink both ways forces equal labels on them
    net.add(source, sink, f64::INFINITY, 0.0);
    net.add(sink, source, f64::INFINITY, 0.0);
    let label = dual_labels(&net)?;
    let demand_duals: Vec<f64> = (0..nd).map(|d| (label[1 + d] - label[source]).max(0.0)).collect();
    let supply_duals: Vec<f64> = (0..ns).map(|s| (label[sink] - label[1 + nd + s]).max(0.0)).collect();
    let edge_duals = inst
        .edges
        .iter()
        .map(|e| (e.reward - demand_duals[e.demand] - supply_duals[e.supply]).max(0.0))
        .collect();

    let mut sol = LpSolution {
        flows,
        objective,
        demand_duals,
        supply_duals,
        edge_duals,
        residuals: Default::default(),
    };
    sol.residuals = verify_solution(inst, &sol);
    Ok(sol)
}
