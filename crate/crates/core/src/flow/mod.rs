//! Bipartite max-reward flow.
//!
//! Both linear programs of the matching model are transportation problems:
//! demand nodes `(i, t)` with capacity, supply nodes `(j, s)` with capacity,
//! and capacitated edges from demand to earlier-or-same-period supply. They
//! are solved exactly as min-cost flows with successive shortest paths, and
//! dual prices are read off the final residual network.

mod ssp;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use ssp::solve;

/// Capacities below this are treated as exhausted.
pub const CAP_EPS: f64 = 1e-13;

/// Tolerance used by [`LpSolution::is_certified`].
pub const CERT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FlowError {
    #[error("{what} capacity {value} must be finite and non-negative")]
    InvalidCap { what: &'static str, value: f64 },
    #[error("edge reward {0} is not finite")]
    InvalidReward(f64),
    #[error("edge endpoint out of range: demand {demand}, supply {supply}")]
    EndpointOutOfRange { demand: usize, supply: usize },
    #[error("supply period {supply_period} is after demand period {demand_period}")]
    FutureSupply {
        demand_period: usize,
        supply_period: usize,
    },
    #[error("node and capacity lists differ in length")]
    ShapeMismatch,
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
}

/// A demand or supply node: customer type and arrival period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Slot {
    #[serde(rename = "type")]
    pub ty: usize,
    pub period: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpEdge {
    pub demand: usize,
    pub supply: usize,
    pub reward: f64,
    pub cap: f64,
}

/// `max sum r x` subject to demand, supply and per-edge capacities.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BipartiteLpInstance {
    pub demand: Vec<Slot>,
    pub demand_caps: Vec<f64>,
    pub supply: Vec<Slot>,
    pub supply_caps: Vec<f64>,
    pub edges: Vec<LpEdge>,
}

fn check_cap(what: &'static str, value: f64) -> Result<(), FlowError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(FlowError::InvalidCap { what, value })
    }
}

impl BipartiteLpInstance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_demand(&mut self, slot: Slot, cap: f64) -> Result<usize, FlowError> {
        check_cap("demand", cap)?;
        self.demand.push(slot);
        self.demand_caps.push(cap);
        Ok(self.demand.len() - 1)
    }

    pub fn add_supply(&mut self, slot: Slot, cap: f64) -> Result<usize, FlowError> {
        check_cap("supply", cap)?;
        self.supply.push(slot);
        self.supply_caps.push(cap);
        Ok(self.supply.len() - 1)
    }

    /// Adds an edge unless its reward is not positive, in which case no
    /// maximizer would use it. Returns whether the edge was kept.
    pub fn add_edge(&mut self, demand: usize, supply: usize, reward: f64, cap: f64) -> Result<bool, FlowError> {
        self.check_edge(&LpEdge {
            demand,
            supply,
            reward,
            cap,
        })?;
        if reward <= 0.0 {
            return Ok(false);
        }
        self.edges.push(LpEdge {
            demand,
            supply,
            reward,
            cap,
        });
        Ok(true)
    }

    fn check_edge(&self, e: &LpEdge) -> Result<(), FlowError> {
        if e.demand >= self.demand.len() || e.supply >= self.supply.len() {
            return Err(FlowError::EndpointOutOfRange {
                demand: e.demand,
                supply: e.supply,
            });
        }
        let (dp, sp) = (self.demand[e.demand].period, self.supply[e.supply].period);
        if sp > dp {
            return Err(FlowError::FutureSupply {
                demand_period: dp,
                supply_period: sp,
            });
        }
        if !e.reward.is_finite() {
            return Err(FlowError::InvalidReward(e.reward));
        }
        check_cap("edge", e.cap)
    }

    /// Checks every invariant; used on deserialized instances.
    pub fn validate(&self) -> Result<(), FlowError> {
        if self.demand.len() != self.demand_caps.len() || self.supply.len() != self.supply_caps.len() {
            return Err(FlowError::ShapeMismatch);
        }
        for &c in &self.demand_caps {
            check_cap("demand", c)?;
        }
        for &c in &self.supply_caps {
            check_cap("supply", c)?;
        }
        for e in &self.edges {
            self.check_edge(e)?;
        }
        Ok(())
    }
}

/// Constraint residuals of a primal/dual pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// Largest violation of `0 <= x <= cap` and of the node capacities.
    pub primal_violation: f64,
    /// Largest violation of `u_d + v_s + w_e >= r_e` and of dual signs.
    pub dual_violation: f64,
    /// `|primal objective - dual objective|`.
    pub duality_gap: f64,
    /// Largest product of a dual price and its constraint slack, or of a
    /// flow and its reduced reward.
    pub cs_slack: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.primal_violation
            .max(self.dual_violation)
            .max(self.cs_slack)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    /// Flow per edge, aligned with [`BipartiteLpInstance::edges`].
    pub flows: Vec<f64>,
    pub objective: f64,
    pub demand_duals: Vec<f64>,
    pub supply_duals: Vec<f64>,
    pub edge_duals: Vec<f64>,
    pub residuals: Residuals,
}

impl LpSolution {
    /// Gap within `CERT_TOL * (1 + |objective|)` and every other residual
    /// within `CERT_TOL`.
    pub fn is_certified(&self) -> bool {
        self.residuals.duality_gap <= CERT_TOL * (1.0 + self.objective.abs())
            && self.residuals.max() <= CERT_TOL
    }
}

/// Recomputes all residuals of `sol` against `inst`.
pub fn verify_solution(inst: &BipartiteLpInstance, sol: &LpSolution) -> Residuals {
    let mut demand_load = vec![0.0; inst.demand.len()];
    let mut supply_load = vec![0.0; inst.supply.len()];
    let mut primal = 0.0f64;
    let mut dual = 0.0f64;
    let mut cs = 0.0f64;
    let mut objective = 0.0;
    for (e, (&x, &w)) in inst.edges.iter().zip(sol.flows.iter().zip(&sol.edge_duals)) {
        demand_load[e.demand] += x;
        supply_load[e.supply] += x;
        objective += e.reward * x;
        primal = primal.max(-x).max(x - e.cap);
        let reduced = sol.demand_duals[e.demand] + sol.supply_duals[e.supply] + w - e.reward;
        dual = dual.max(-reduced).max(-w);
        cs = cs.max((x * reduced).abs()).max((w * (e.cap - x)).abs());
    }
    let mut dual_objective = 0.0;
    for (&load, (&cap, &u)) in demand_load
        .iter()
        .zip(inst.demand_caps.iter().zip(&sol.demand_duals))
    {
        primal = primal.max(load - cap);
        dual = dual.max(-u);
        cs = cs.max((u * (cap - load)).abs());
        dual_objective += cap * u;
    }
    for (&load, (&cap, &v)) in supply_load
        .iter()
        .zip(inst.supply_caps.iter().zip(&sol.supply_duals))
    {
        primal = primal.max(load - cap);
        dual = dual.max(-v);
        cs = cs.max((v * (cap - load)).abs());
        dual_objective += cap * v;
    }
    for (e, &w) in inst.edges.iter().zip(&sol.edge_duals) {
        dual_objective += e.cap * w;
    }
    Residuals {
        primal_violation: primal.max(0.0),
        dual_violation: dual.max(0.0),
        duality_gap: (objective - dual_objective).abs(),
        cs_slack: cs,
    }
}

/// `max sum r x` over the fluid relaxation; the instance already carries
/// the capacities `lambda_it`, `mu_js` and `lambda_it * mu_js`.
pub fn solve_lp3(inst: &BipartiteLpInstance) -> Result<LpSolution, FlowError> {
    solve(inst)
}

/// Max-weight matching of realized demand units to realized supply units.
/// `reward(d, s)` is the value of matching demand unit `d` to supply unit
/// `s`; pairs whose supply arrives after the demand are excluded.
pub fn solve_offline_matching<F>(
    demand: &[Slot],
    supply: &[Slot],
    reward: F,
) -> Result<(BipartiteLpInstance, LpSolution), FlowError>
where
    F: Fn(Slot, Slot) -> f64,
{
    let mut inst = BipartiteLpInstance::new();
    for &d in demand {
        inst.add_demand(d, 1.0)?;
    }
    for &s in supply {
        inst.add_supply(s, 1.0)?;
    }
    for (di, &d) in demand.iter().enumerate() {
        for (si, &s) in supply.iter().enumerate() {
            if s.period <= d.period {
                inst.add_edge(di, si, reward(d, s), 1.0)?;
            }
        }
    }
    let sol = solve(&inst)?;
    Ok((inst, sol))
}

/// Writes `(i,j,t,s,x)` for every edge with positive flow.
pub fn write_flows_csv<W: Write>(inst: &BipartiteLpInstance, sol: &LpSolution, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "j", "t", "s", "x"])?;
    for (e, &x) in inst.edges.iter().zip(&sol.flows) {
        if x <= 0.0 {
            continue;
        }
        let (d, s) = (inst.demand[e.demand], inst.supply[e.supply]);
        w.write_record([
            d.ty.to_string(),
            s.ty.to_string(),
            d.period.to_string(),
            s.period.to_string(),
            x.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
