use super::{MatchError, MatchInstance};
use crate::flow::{solve_lp3, LpSolution};

/// Tolerance on the separation probabilities summing to at most 1.
pub const PICK_TOL: f64 = 1e-9;

/// A supply unit `(j, s)` seen from demand `(i, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteEntry {
    pub j: usize,
    pub s: usize,
    /// `x*_ijts / mu_js`.
    pub ratio: f64,
}

/// A demand slot `(i, t)` seen from supply unit `(j, s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitEntry {
    pub i: usize,
    pub t: usize,
    /// `x*_ijts / mu_js`.
    pub ratio: f64,
    /// `r_ijts * x*_ijts / mu_js`.
    pub weighted_reward: f64,
}

/// The support of an LP optimum `x*`, indexed both by demand slot and by
/// supply unit.
#[derive(Debug, Clone)]
pub struct RoutingPlan {
    num_demand_types: usize,
    num_supply_types: usize,
    horizon: usize,
    by_demand: Vec<Vec<RouteEntry>>,
    by_supply: Vec<Vec<UnitEntry>>,
    objective: f64,
    supply_duals: Vec<f64>,
}

impl RoutingPlan {
    /// Solves the fluid relaxation of `inst` and keeps its positive flows.
    pub fn solve(inst: &MatchInstance) -> Result<Self, MatchError> {
        let lp = inst.lp3();
        let sol = solve_lp3(&lp)?;
        Ok(Self::from_solution(inst, &lp, &sol))
    }

    pub fn from_solution(inst: &MatchInstance, lp: &crate::flow::BipartiteLpInstance, sol: &LpSolution) -> Self {
        let (ni, nj, nt) = (inst.num_demand_types(), inst.num_supply_types(), inst.horizon());
        let mut by_demand = vec![Vec::new(); ni * nt];
        let mut by_supply = vec![Vec::new(); nj * nt];
        for (e, &x) in lp.edges.iter().zip(&sol.flows) {
            if x <= 0.0 {
                continue;
            }
            let (d, u) = (lp.demand[e.demand], lp.supply[e.supply]);
            let (i, t, j, s) = (d.ty, d.period, u.ty, u.period);
            let ratio = x / inst.mu(j, s);
            by_demand[t * ni + i].push(RouteEntry { j, s, ratio });
            by_supply[s * nj + j].push(UnitEntry {
                i,
                t,
                ratio,
                weighted_reward: inst.reward(i, j, t, s) * ratio,
            });
        }
        let mut supply_duals = vec![0.0; nj * nt];
        for (k, slot) in lp.supply.iter().enumerate() {
            supply_duals[slot.period * nj + slot.ty] = sol.supply_duals[k];
        }
        Self {
            num_demand_types: ni,
            num_supply_types: nj,
            horizon: nt,
            by_demand,
            by_supply,
            objective: sol.objective,
            supply_duals,
        }
    }

    /// Builds a plan from explicit `x*` values `(i, j, t, s, x)`; for tests
    /// and hand-made examples.
    pub fn from_flows(inst: &MatchInstance, flows: &[(usize, usize, usize, usize, f64)]) -> Self {
        let (ni, nj, nt) = (inst.num_demand_types(), inst.num_supply_types(), inst.horizon());
        let mut by_demand = vec![Vec::new(); ni * nt];
        let mut by_supply = vec![Vec::new(); nj * nt];
        let mut objective = 0.0;
        for &(i, j, t, s, x) in flows {
            assert!(s <= t, "x* must vanish for s > t");
            if x <= 0.0 {
                continue;
            }
            let ratio = x / inst.mu(j, s);
            objective += inst.reward(i, j, t, s) * x;
            by_demand[t * ni + i].push(RouteEntry { j, s, ratio });
            by_supply[s * nj + j].push(UnitEntry {
                i,
                t,
                ratio,
                weighted_reward: inst.reward(i, j, t, s) * ratio,
            });
        }
        Self {
            num_demand_types: ni,
            num_supply_types: nj,
            horizon: nt,
            by_demand,
            by_supply,
            objective,
            supply_duals: vec![0.0; nj * nt],
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_demand_types(&self) -> usize {
        self.num_demand_types
    }

    pub fn num_supply_types(&self) -> usize {
        self.num_supply_types
    }

    /// Objective of the LP the plan came from.
    pub fn objective(&self) -> f64 {
        self.objective
    }

    /// Supply units `(j, s)` with `x*_ijts > 0`.
    pub fn routes(&self, i: usize, t: usize) -> &[RouteEntry] {
        &self.by_demand[t * self.num_demand_types + i]
    }

    /// Demand slots `(i, t)` with `x*_ijts > 0`.
    pub fn unit_entries(&self, j: usize, s: usize) -> &[UnitEntry] {
        &self.by_supply[s * self.num_supply_types + j]
    }

    /// Dual price of the capacity of supply node `(j, s)`.
    pub fn supply_dual(&self, j: usize, s: usize) -> f64 {
        self.supply_duals[s * self.num_supply_types + j]
    }

    pub fn set_supply_duals(&mut self, duals: Vec<f64>) {
        assert_eq!(duals.len(), self.supply_duals.len());
        self.supply_duals = duals;
    }

    /// `x*_ijts`.
    pub fn x_star(&self, inst: &MatchInstance, i: usize, j: usize, t: usize, s: usize) -> f64 {
        self.routes(i, t)
            .iter()
            .find(|e| e.j == j && e.s == s)
            .map_or(0.0, |e| e.ratio * inst.mu(j, s))
    }
}

/// `min(lambda, Y) / Y`, or 0 when `Y = 0`.
pub fn separation_scale(lambda: f64, total: f64) -> f64 {
    if total > 0.0 {
        lambda.min(total) / total
    } else {
        0.0
    }
}

/// `p_ijts(S_t)` for every arrived unit `(j, s)` with `x*_ijts > 0`, given
/// the supply arrivals `supply[..=t]`. Units that already left the market
/// still count: the probabilities depend on arrivals only.
pub fn separation_probs(
    inst: &MatchInstance,
    plan: &RoutingPlan,
    supply: &[Option<usize>],
    i: usize,
    t: usize,
) -> Vec<(usize, usize, f64)> {
    let arrived: Vec<&RouteEntry> = plan
        .routes(i, t)
        .iter()
        .filter(|e| e.s <= t && supply[e.s] == Some(e.j))
        .collect();
    let total: f64 = arrived.iter().map(|e| e.ratio).sum();
    let scale = separation_scale(inst.lambda(i, t), total);
    arrived
        .into_iter()
        .map(|e| (e.j, e.s, scale * e.ratio))
        .collect()
}

/// Picks `(j, s)` with probability `p / lambda` using the uniform `u`, or
/// nothing with the leftover mass.
pub fn separation_pick(
    probs: &[(usize, usize, f64)],
    lambda: f64,
    u: f64,
) -> Result<Option<(usize, usize)>, MatchError> {
    let mass: f64 = probs.iter().map(|p| p.2 / lambda).sum();
    if mass > 1.0 + PICK_TOL {
        return Err(MatchError::Consistency(format!(
            "separation probabilities sum to {mass} > 1"
        )));
    }
    let mut acc = 0.0;
    for &(j, s, p) in probs {
        acc += p / lambda;
        if u < acc {
            return Ok(Some((j, s)));
        }
    }
    Ok(None)
}
