use rand::Rng;
use serde::{Deserialize, Serialize};

use super::MatchError;
use crate::flow::{BipartiteLpInstance, Slot};
use crate::scenario::{sample_arrival, PROB_TOL};

/// One nonzero reward entry in an instance file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardEntry {
    pub i: usize,
    pub j: usize,
    pub t: usize,
    pub s: usize,
    pub r: f64,
}

/// Serialized two-sided market. Rates are `[period][type]`; periods and
/// types are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchInstanceSpec {
    pub num_demand_types: usize,
    pub num_supply_types: usize,
    pub horizon: usize,
    pub lambda: Vec<Vec<f64>>,
    pub mu: Vec<Vec<f64>>,
    #[serde(default)]
    pub rewards: Vec<RewardEntry>,
}

/// A two-sided market: demand type `i` arrives in period `t` with
/// probability `lambda_it`, supply type `j` in period `s` with probability
/// `mu_js`, and matching them earns `r_ijts` when `s <= t`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchInstance {
    num_demand_types: usize,
    num_supply_types: usize,
    horizon: usize,
    lambda: Vec<f64>,
    mu: Vec<f64>,
    rewards: Vec<f64>,
}

fn check_rates(side: &'static str, rows: &[f64], types: usize, horizon: usize) -> Result<(), MatchError> {
    for t in 0..horizon {
        let row = &rows[t * types..(t + 1) * types];
        for (k, &x) in row.iter().enumerate() {
            if !(x.is_finite() && x > 0.0 && x <= 1.0) {
                return Err(MatchError::InvalidRate {
                    side,
                    ty: k,
                    period: t,
                    value: x,
                });
            }
        }
        let sum: f64 = row.iter().sum();
        if sum > 1.0 + PROB_TOL {
            return Err(MatchError::RateSumExceeded { side, period: t, sum });
        }
    }
    Ok(())
}

impl MatchInstance {
    /// Builds an instance from dense arrays: `lambda[t * I + i]`,
    /// `mu[s * J + j]` and `rewards[((i * J + j) * T + t) * T + s]`.
    /// Entries with `s > t` must be zero.
    pub fn new(
        num_demand_types: usize,
        num_supply_types: usize,
        horizon: usize,
        lambda: Vec<f64>,
        mu: Vec<f64>,
        rewards: Vec<f64>,
    ) -> Result<Self, MatchError> {
        let (ni, nj, nt) = (num_demand_types, num_supply_types, horizon);
        if ni == 0 || nj == 0 || nt == 0 {
            return Err(MatchError::Shape("types and horizon must be positive".into()));
        }
        if lambda.len() != ni * nt || mu.len() != nj * nt || rewards.len() != ni * nj * nt * nt {
            return Err(MatchError::Shape(format!(
                "expected {} lambda, {} mu and {} reward entries, found {}, {}, {}",
                ni * nt,
                nj * nt,
                ni * nj * nt * nt,
                lambda.len(),
                mu.len(),
                rewards.len()
            )));
        }
        check_rates("lambda", &lambda, ni, nt)?;
        check_rates("mu", &mu, nj, nt)?;
        let inst = Self {
            num_demand_types: ni,
            num_supply_types: nj,
            horizon: nt,
            lambda,
            mu,
            rewards,
        };
        for i in 0..ni {
            for j in 0..nj {
                for t in 0..nt {
                    for s in 0..nt {
                        let r = inst.rewards[inst.reward_index(i, j, t, s)];
                        if !r.is_finite() {
                            return Err(MatchError::InvalidReward { i, j, t, s, r });
                        }
                        if s > t && r != 0.0 {
                            return Err(MatchError::FutureReward { i, j, t, s });
                        }
                    }
                }
            }
        }
        Ok(inst)
    }

    pub fn from_spec(spec: &MatchInstanceSpec) -> Result<Self, MatchError> {
        let (ni, nj, nt) = (spec.num_demand_types, spec.num_supply_types, spec.horizon);
        let flatten = |name: &str, rows: &[Vec<f64>], width: usize| -> Result<Vec<f64>, MatchError> {
            if rows.len() != nt || rows.iter().any(|r| r.len() != width) {
                return Err(MatchError::Shape(format!("`{name}` must be {nt} rows of {width} entries")));
            }
            Ok(rows.concat())
        };
        let lambda = flatten("lambda", &spec.lambda, ni)?;
        let mu = flatten("mu", &spec.mu, nj)?;
        let mut rewards = vec![0.0; ni * nj * nt * nt];
        for e in &spec.rewards {
            if e.i >= ni || e.j >= nj || e.t >= nt || e.s >= nt {
                return Err(MatchError::Shape(format!(
                    "reward entry (i={}, j={}, t={}, s={}) out of range",
                    e.i, e.j, e.t, e.s
                )));
            }
            rewards[((e.i * nj + e.j) * nt + e.t) * nt + e.s] = e.r;
        }
        Self::new(ni, nj, nt, lambda, mu, rewards)
    }

    pub fn to_spec(&self) -> MatchInstanceSpec {
        let (ni, nj, nt) = (self.num_demand_types, self.num_supply_types, self.horizon);
        let mut rewards = Vec::new();
        for i in 0..ni {
            for j in 0..nj {
                for t in 0..nt {
                    for s in 0..=t {
                        let r = self.reward(i, j, t, s);
                        if r != 0.0 {
                            rewards.push(RewardEntry { i, j, t, s, r });
                        }
                    }
                }
            }
        }
        MatchInstanceSpec {
            num_demand_types: ni,
            num_supply_types: nj,
            horizon: nt,
            lambda: self.lambda.chunks(ni).map(<[f64]>::to_vec).collect(),
            mu: self.mu.chunks(nj).map(<[f64]>::to_vec).collect(),
            rewards,
        }
    }

    pub fn num_demand_types(&self) -> usize {
        self.num_demand_types
    }

    pub fn num_supply_types(&self) -> usize {
        self.num_supply_types
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn lambda(&self, i: usize, t: usize) -> f64 {
        self.lambda[t * self.num_demand_types + i]
    }

    pub fn mu(&self, j: usize, s: usize) -> f64 {
        self.mu[s * self.num_supply_types + j]
    }

    /// Demand arrival probabilities of period `t`.
    pub fn lambda_row(&self, t: usize) -> &[f64] {
        &self.lambda[t * self.num_demand_types..(t + 1) * self.num_demand_types]
    }

    /// Supply arrival probabilities of period `s`.
    pub fn mu_row(&self, s: usize) -> &[f64] {
        &self.mu[s * self.num_supply_types..(s + 1) * self.num_supply_types]
    }

    fn reward_index(&self, i: usize, j: usize, t: usize, s: usize) -> usize {
        ((i * self.num_supply_types + j) * self.horizon + t) * self.horizon + s
    }

    /// `r_ijts`, zero when `s > t`.
    pub fn reward(&self, i: usize, j: usize, t: usize, s: usize) -> f64 {
        if s > t {
            0.0
        } else {
            self.rewards[self.reward_index(i, j, t, s)]
        }
    }

    /// The fluid relaxation: demand node `t * I + i` with capacity
    /// `lambda_it`, supply node `s * J + j` with capacity `mu_js`, and an
    /// edge of capacity `lambda_it * mu_js` for every positive reward.
    pub fn lp3(&self) -> BipartiteLpInstance {
        let (ni, nj, nt) = (self.num_demand_types, self.num_supply_types, self.horizon);
        let mut lp = BipartiteLpInstance::new();
        for t in 0..nt {
            for i in 0..ni {
                lp.add_demand(Slot { ty: i, period: t }, self.lambda(i, t))
                    .expect("validated rate");
            }
        }
        for s in 0..nt {
            for j in 0..nj {
                lp.add_supply(Slot { ty: j, period: s }, self.mu(j, s))
                    .expect("validated rate");
            }
        }
        for t in 0..nt {
            for i in 0..ni {
                for s in 0..=t {
                    for j in 0..nj {
                        let cap = self.lambda(i, t) * self.mu(j, s);
                        lp.add_edge(t * ni + i, s * nj + j, self.reward(i, j, t, s), cap)
                            .expect("validated edge");
                    }
                }
            }
        }
        lp
    }
}

/// Realized arrivals `(Lambda, M)` plus the uniforms that produced them.
/// All vectors are indexed by period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub demand: Vec<Option<usize>>,
    pub supply: Vec<Option<usize>>,
    /// `u_t`, which decided the demand arrival.
    pub demand_uniforms: Vec<f64>,
    /// `v_s`, which decided the supply arrival.
    pub supply_uniforms: Vec<f64>,
    /// Uniform used by the separation step in each period, shared by all
    /// policies run on this realization.
    pub pick_uniforms: Vec<f64>,
}

impl Realization {
    /// Fixed arrivals; pick uniforms default to 0.
    pub fn with_arrivals(demand: Vec<Option<usize>>, supply: Vec<Option<usize>>) -> Self {
        assert_eq!(demand.len(), supply.len(), "one slot per period on both sides");
        let n = demand.len();
        Self {
            demand,
            supply,
            demand_uniforms: vec![0.0; n],
            supply_uniforms: vec![0.0; n],
            pick_uniforms: vec![0.0; n],
        }
    }

    pub fn horizon(&self) -> usize {
        self.demand.len()
    }

    /// Realized demand units as `(type, period)` slots.
    pub fn demand_slots(&self) -> Vec<Slot> {
        slots(&self.demand)
    }

    /// Realized supply units as `(type, period)` slots.
    pub fn supply_slots(&self) -> Vec<Slot> {
        slots(&self.supply)
    }
}

fn slots(side: &[Option<usize>]) -> Vec<Slot> {
    side.iter()
        .enumerate()
        .filter_map(|(t, a)| a.map(|ty| Slot { ty, period: t }))
        .collect()
}

/// Draws `v_s`, `u_t` and the pick uniform for each period in that order and
/// maps them to arrivals by interval membership.
pub fn sample_realization<R: Rng + ?Sized>(inst: &MatchInstance, rng: &mut R) -> Realization {
    let n = inst.horizon();
    let mut out = Realization {
        demand: Vec::with_capacity(n),
        supply: Vec::with_capacity(n),
        demand_uniforms: Vec::with_capacity(n),
        supply_uniforms: Vec::with_capacity(n),
        pick_uniforms: Vec::with_capacity(n),
    };
    for t in 0..n {
        let v: f64 = rng.random();
        let u: f64 = rng.random();
        let w: f64 = rng.random();
        out.supply.push(sample_arrival(inst.mu_row(t), v));
        out.demand.push(sample_arrival(inst.lambda_row(t), u));
        out.supply_uniforms.push(v);
        out.demand_uniforms.push(u);
        out.pick_uniforms.push(w);
    }
    out
}
