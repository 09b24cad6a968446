//! Per-unit admission thresholds.
//!
//! Each supply unit `(j, s)` runs its own single-resource STP with `tbar = 1`
//! on the arrival probabilities `p_ijts(S_t)` that separation routes to it:
//!
//! `h_js(S_t) = E[sum_{t'>t} sum_i r_ijt's p_ijt's(S_t') | S_t] / (2 - sum_{t'<=t} sum_i p_ijt's(S_t'))`.
//!
//! The past mass in the denominator is known exactly from the supply history;
//! only the future supply arrivals are simulated.

use rand::Rng;

use super::plan::{separation_scale, RoutingPlan};
use super::{MatchError, MatchInstance};
use crate::prophet::ThresholdEstimate;
use crate::scenario::sample_arrival;
use crate::stats::Welford;

/// Slack allowed on the unit mass bound before it counts as a bug.
pub const MASS_TOL: f64 = 1e-9;

/// An arrived supply unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitState {
    pub j: usize,
    pub s: usize,
    pub available: bool,
    /// `sum_{t' <= t} sum_i p_ijt's(S_t')` through the last advanced period.
    pub past_mass: f64,
}

/// Arrived supply units, keyed by arrival period, with their running
/// admission mass.
#[derive(Debug, Clone)]
pub struct SupplyState {
    units: Vec<Option<UnitState>>,
}

impl SupplyState {
    pub fn new(horizon: usize) -> Self {
        Self {
            units: vec![None; horizon],
        }
    }

    /// Registers the supply unit of type `j` arriving in period `s`.
    pub fn arrive(&mut self, s: usize, j: usize) {
        self.units[s] = Some(UnitState {
            j,
            s,
            available: true,
            past_mass: 0.0,
        });
    }

    pub fn unit(&self, s: usize) -> Option<&UnitState> {
        self.units[s].as_ref()
    }

    pub fn is_available(&self, s: usize) -> bool {
        self.units[s].is_some_and(|u| u.available)
    }

    /// Marks the unit of period `s` as matched.
    pub fn take(&mut self, s: usize) {
        let unit = self.units[s].as_mut().expect("taking a unit that never arrived");
        assert!(unit.available, "unit of period {s} matched twice");
        unit.available = false;
    }

    /// Available units in arrival order.
    pub fn available(&self) -> impl Iterator<Item = &UnitState> {
        self.units.iter().flatten().filter(|u| u.available)
    }

    /// Adds period `t`'s arrival probabilities `sum_i p_ijts(S_t)` to every
    /// arrived unit. `supply` must hold the arrivals through period `t`.
    pub fn advance(
        &mut self,
        inst: &MatchInstance,
        plan: &RoutingPlan,
        supply: &[Option<usize>],
        t: usize,
    ) -> Result<(), MatchError> {
        for i in 0..inst.num_demand_types() {
            let routes = plan.routes(i, t);
            let arrived = |e: &&super::plan::RouteEntry| e.s <= t && supply[e.s] == Some(e.j);
            let total: f64 = routes.iter().filter(arrived).map(|e| e.ratio).sum();
            let scale = separation_scale(inst.lambda(i, t), total);
            if scale == 0.0 {
                continue;
            }
            for e in routes.iter().filter(arrived) {
                let unit = self.units[e.s].as_mut().expect("arrived unit is registered");
                unit.past_mass += scale * e.ratio;
            }
        }
        for unit in self.units.iter().flatten() {
            if unit.past_mass > 1.0 + MASS_TOL {
                return Err(MatchError::Consistency(format!(
                    "unit (j={}, s={}) has admission mass {} > 1",
                    unit.j, unit.s, unit.past_mass
                )));
            }
        }
        Ok(())
    }

    /// Replays periods `0..=t` of `supply`.
    pub fn replay(
        inst: &MatchInstance,
        plan: &RoutingPlan,
        supply: &[Option<usize>],
        t: usize,
    ) -> Result<Self, MatchError> {
        let mut state = Self::new(inst.horizon());
        for (p, a) in supply.iter().enumerate().take(t + 1) {
            if let Some(j) = *a {
                state.arrive(p, j);
            }
            state.advance(inst, plan, supply, p)?;
        }
        Ok(state)
    }
}

/// Simulated futures of the supply process after period `t`, shared by all
/// threshold evaluations at one decision.
#[derive(Debug, Clone)]
pub struct ContinuationSet {
    t: usize,
    num_demand_types: usize,
    n_paths: usize,
    /// Separation scale per path, future period and demand type:
    /// `scales[(path * F + (t' - t - 1)) * I + i]` with `F = T - t - 1`.
    scales: Vec<f64>,
}

impl ContinuationSet {
    /// Samples `n_paths` continuations of the supply arrivals for periods
    /// `t+1..T`, conditional on `supply[..=t]`.
    pub fn sample<R: Rng + ?Sized>(
        inst: &MatchInstance,
        plan: &RoutingPlan,
        supply: &[Option<usize>],
        t: usize,
        n_paths: usize,
        rng: &mut R,
    ) -> Result<Self, MatchError> {
        if n_paths == 0 {
            return Err(MatchError::InvalidSampleCount(n_paths));
        }
        let ni = inst.num_demand_types();
        let future = inst.horizon() - t - 1;
        let mut base = vec![0.0; future * ni];
        let add = |sums: &mut [f64], j: usize, s: usize| {
            for e in plan.unit_entries(j, s) {
                if e.t > t {
                    sums[(e.t - t - 1) * ni + e.i] += e.ratio;
                }
            }
        };
        for (s, a) in supply.iter().enumerate().take(t + 1) {
            if let Some(j) = *a {
                add(&mut base, j, s);
            }
        }
        let mut scales = Vec::with_capacity(n_paths * future * ni);
        let mut sums = vec![0.0; future * ni];
        for _ in 0..n_paths {
            sums.copy_from_slice(&base);
            for s in t + 1..inst.horizon() {
                let v: f64 = rng.random();
                if let Some(j) = sample_arrival(inst.mu_row(s), v) {
                    add(&mut sums, j, s);
                }
            }
            for (k, &y) in sums.iter().enumerate() {
                let (tp, i) = (t + 1 + k / ni, k % ni);
                scales.push(separation_scale(inst.lambda(i, tp), y));
            }
        }
        Ok(Self {
            t,
            num_demand_types: ni,
            n_paths,
            scales,
        })
    }

    pub fn period(&self) -> usize {
        self.t
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    /// `h_js(S_t)` for unit `(j, s)` whose realized mass through `t` is
    /// `past_mass`.
    pub fn threshold(
        &self,
        plan: &RoutingPlan,
        j: usize,
        s: usize,
        past_mass: f64,
    ) -> Result<ThresholdEstimate, MatchError> {
        if past_mass > 1.0 + MASS_TOL {
            return Err(MatchError::Consistency(format!(
                "unit (j={j}, s={s}) has admission mass {past_mass} > 1"
            )));
        }
        let ni = self.num_demand_types;
        let future = self.scales.len() / (self.n_paths * ni).max(1);
        let denom = 2.0 - past_mass;
        let entries: Vec<_> = plan
            .unit_entries(j, s)
            .iter()
            .filter(|e| e.t > self.t)
            .map(|e| ((e.t - self.t - 1) * ni + e.i, e.weighted_reward))
            .collect();
        let mut acc = Welford::new();
        for path in 0..self.n_paths {
            let row = &self.scales[path * future * ni..(path + 1) * future * ni];
            let total: f64 = entries.iter().map(|&(k, w)| w * row[k]).sum();
            acc.push(total / denom);
        }
        Ok(ThresholdEstimate {
            value: acc.mean(),
            stderr: acc.stderr(),
            n_paths: self.n_paths,
        })
    }
}

/// Monte Carlo `h_js(S_t)` for the arrived unit `(j, s)` given the supply
/// history `supply[..=t]`.
pub fn admission_threshold<R: Rng + ?Sized>(
    inst: &MatchInstance,
    plan: &RoutingPlan,
    unit: (usize, usize),
    supply: &[Option<usize>],
    t: usize,
    n_paths: usize,
    rng: &mut R,
) -> Result<ThresholdEstimate, MatchError> {
    let (j, s) = unit;
    if s > t || supply[s] != Some(j) {
        return Err(MatchError::Consistency(format!("unit (j={j}, s={s}) has not arrived by period {t}")));
    }
    let state = SupplyState::replay(inst, plan, supply, t)?;
    let past = state.unit(s).expect("arrived").past_mass;
    ContinuationSet::sample(inst, plan, supply, t, n_paths, rng)?.threshold(plan, j, s, past)
}
