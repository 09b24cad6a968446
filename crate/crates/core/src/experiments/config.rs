use serde::{Deserialize, Serialize};

use super::market::Geography;
use super::ExperimentError;

/// Parameter varied by one row of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Alpha,
    Tau,
    Beta,
    Omega,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::Tau => "tau",
            SweepParam::Beta => "beta",
            SweepParam::Omega => "omega",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub param: SweepParam,
    pub value: f64,
}

impl SweepPoint {
    pub fn label(&self) -> String {
        format!("{} = {}", self.param.name(), self.value)
    }
}

fn default_types() -> usize {
    30
}
fn default_horizon() -> usize {
    60
}
fn default_alpha() -> f64 {
    0.5
}
fn default_tau() -> f64 {
    10.0
}
fn default_beta() -> f64 {
    0.5
}
fn default_omega() -> f64 {
    0.05
}
fn default_replicates() -> usize {
    1000
}
fn default_inner_paths() -> usize {
    100
}
fn default_multipliers() -> Vec<f64> {
    vec![1.0, 1.3, 1.6, 2.0]
}

/// Every field has a default, so `{}` is the full-scale base case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_types", alias = "I")]
    pub demand_types: usize,
    #[serde(default = "default_types", alias = "J")]
    pub supply_types: usize,
    #[serde(default = "default_horizon", alias = "T")]
    pub horizon: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Idle-time scale in periods.
    #[serde(default = "default_tau", alias = "tau")]
    pub tau_idle: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Distance scale in degrees.
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_inner_paths")]
    pub n_inner_paths: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Which random market to draw; different scenarios share nothing.
    #[serde(default)]
    pub scenario: u64,
    /// Multipliers of the resource-sharing variants, in column order.
    #[serde(default = "default_multipliers")]
    pub margin_multipliers: Vec<f64>,
    /// Rows of `reproduce_tables` after the base row.
    #[serde(default = "ExperimentConfig::default_sweep")]
    pub sweep: Vec<SweepPoint>,
    /// Type locations; drawn uniformly when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinates: Option<Geography>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            demand_types: default_types(),
            supply_types: default_types(),
            horizon: default_horizon(),
            alpha: default_alpha(),
            tau_idle: default_tau(),
            beta: default_beta(),
            omega: default_omega(),
            replicates: default_replicates(),
            n_inner_paths: default_inner_paths(),
            master_seed: 0,
            scenario: 0,
            margin_multipliers: default_multipliers(),
            sweep: Self::default_sweep(),
            coordinates: None,
        }
    }
}

impl ExperimentConfig {
    /// Smaller market that runs in seconds: 10 x 10 types, 30 periods, 200
    /// replicates, 50 inner paths.
    pub fn desk() -> Self {
        Self {
            demand_types: 10,
            supply_types: 10,
            horizon: 30,
            replicates: 200,
            n_inner_paths: 50,
            ..Self::default()
        }
    }

    /// The sixteen one-at-a-time variations around the base case.
    pub fn default_sweep() -> Vec<SweepPoint> {
        let rows: [(SweepParam, [f64; 4]); 4] = [
            (SweepParam::Alpha, [0.0, 0.2, 0.8, 1.0]),
            (SweepParam::Tau, [2.0, 5.0, 20.0, 30.0]),
            (SweepParam::Beta, [0.0, 0.2, 0.8, 1.0]),
            (SweepParam::Omega, [0.005, 0.02, 0.08, 0.15]),
        ];
        rows.iter()
            .flat_map(|&(param, values)| values.into_iter().map(move |value| SweepPoint { param, value }))
            .collect()
    }

    /// Copy with one parameter replaced.
    pub fn with_point(&self, point: SweepPoint) -> Self {
        let mut c = self.clone();
        match point.param {
            SweepParam::Alpha => c.alpha = point.value,
            SweepParam::Tau => c.tau_idle = point.value,
            SweepParam::Beta => c.beta = point.value,
            SweepParam::Omega => c.omega = point.value,
        }
        c
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::Config(msg));
        if self.demand_types == 0 || self.supply_types == 0 || self.horizon == 0 {
            return bad("demand_types, supply_types and horizon must be positive".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.n_inner_paths == 0 {
            return bad("n_inner_paths must be at least 1".into());
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        for (name, v) in [("tau_idle", self.tau_idle), ("omega", self.omega)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if let Some(&m) = self.margin_multipliers.iter().find(|m| !(m.is_finite() && **m >= 1.0)) {
            return bad(format!("margin multipliers must be at least 1, got {m}"));
        }
        for p in &self.sweep {
            self.with_point(*p).validate_scalars()?;
        }
        if let Some(g) = &self.coordinates {
            g.check(self.demand_types, self.supply_types)?;
        }
        Ok(())
    }

    fn validate_scalars(&self) -> Result<(), ExperimentError> {
        Self {
            sweep: Vec::new(),
            coordinates: None,
            ..self.clone()
        }
        .validate()
    }
}
