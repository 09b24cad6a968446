use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, ExperimentError};
use crate::matching::MatchInstance;

/// Side of the square, in degrees, that type locations are drawn from.
pub const REGION_SIZE: f64 = 0.25;

/// Planar location of each type, in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geography {
    pub demand: Vec<[f64; 2]>,
    pub supply: Vec<[f64; 2]>,
}

impl Geography {
    pub fn uniform<R: Rng + ?Sized>(num_demand: usize, num_supply: usize, rng: &mut R) -> Self {
        let mut point = || [rng.random::<f64>() * REGION_SIZE, rng.random::<f64>() * REGION_SIZE];
        let demand = (0..num_demand).map(|_| point()).collect();
        let supply = (0..num_supply).map(|_| point()).collect();
        Self { demand, supply }
    }

    /// L1 distance between demand type `i` and supply type `j`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.demand[i], self.supply[j]);
        (a[0] - b[0]).abs() + (a[1] - b[1]).abs()
    }

    pub(crate) fn check(&self, num_demand: usize, num_supply: usize) -> Result<(), ExperimentError> {
        if self.demand.len() != num_demand || self.supply.len() != num_supply {
            return Err(ExperimentError::Config(format!(
                "coordinates list {} demand and {} supply points, expected {num_demand} and {num_supply}",
                self.demand.len(),
                self.supply.len()
            )));
        }
        if self.demand.iter().chain(&self.supply).flatten().any(|x| !x.is_finite()) {
            return Err(ExperimentError::Config("coordinates must be finite".into()));
        }
        Ok(())
    }
}

/// `1 - alpha + alpha * exp(-(t - s) / tau)`.
pub fn idle_discount(alpha: f64, tau: f64, idle: usize) -> f64 {
    1.0 - alpha + alpha * (-(idle as f64) / tau).exp()
}

/// `1 - beta + beta * exp(-d / omega)`.
pub fn distance_discount(beta: f64, omega: f64, d: f64) -> f64 {
    1.0 - beta + beta * (-d / omega).exp()
}

/// The random ingredients of a market, independent of `alpha`, `tau`,
/// `beta` and `omega`, so a parameter sweep reuses them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDraw {
    /// `s_ij`, row-major `I x J`.
    pub quality: Vec<f64>,
    /// `lambda(t)`: probability that some employer arrives.
    pub lambda_rate: Vec<f64>,
    /// `mu(t)`: probability that some worker arrives.
    pub mu_rate: Vec<f64>,
    pub geography: Geography,
}

/// A market ready for simulation together with what produced it.
#[derive(Debug, Clone)]
pub struct GeneratedScenario {
    pub instance: MatchInstance,
    pub draw: ScenarioDraw,
}

/// Draws quality, arrival rates and, unless the config fixes them, type
/// locations.
pub fn draw_scenario<R: Rng + ?Sized>(config: &ExperimentConfig, rng: &mut R) -> ScenarioDraw {
    let (ni, nj, nt) = (config.demand_types, config.supply_types, config.horizon);
    let quality = (0..ni * nj).map(|_| rng.sample(StandardNormal)).collect();
    // 1 - U keeps the rates in (0, 1]
    let lambda_rate = (0..nt).map(|_| 1.0 - rng.random::<f64>()).collect();
    let mu_rate = (0..nt).map(|_| 1.0 - rng.random::<f64>()).collect();
    let geography = match &config.coordinates {
        Some(g) => g.clone(),
        None => Geography::uniform(ni, nj, rng),
    };
    ScenarioDraw {
        quality,
        lambda_rate,
        mu_rate,
        geography,
    }
}

impl ScenarioDraw {
    /// Instance for the discount parameters of `config`; types are equally
    /// likely on both sides.
    pub fn build(&self, config: &ExperimentConfig) -> Result<MatchInstance, ExperimentError> {
        config.validate()?;
        let (ni, nj, nt) = (config.demand_types, config.supply_types, config.horizon);
        if self.quality.len() != ni * nj || self.lambda_rate.len() != nt || self.mu_rate.len() != nt {
            return Err(ExperimentError::Config("scenario draw does not match the config dimensions".into()));
        }
        self.geography.check(ni, nj)?;
        let lambda = (0..nt)
            .flat_map(|t| std::iter::repeat_n(self.lambda_rate[t] / ni as f64, ni))
            .collect();
        let mu = (0..nt)
            .flat_map(|s| std::iter::repeat_n(self.mu_rate[s] / nj as f64, nj))
            .collect();
        let idle: Vec<f64> = (0..nt).map(|k| idle_discount(config.alpha, config.tau_idle, k)).collect();
        let mut rewards = vec![0.0; ni * nj * nt * nt];
        for i in 0..ni {
            for j in 0..nj {
                let base = self.quality[i * nj + j]
                    * distance_discount(config.beta, config.omega, self.geography.distance(i, j));
                for t in 0..nt {
                    for s in 0..=t {
                        rewards[((i * nj + j) * nt + t) * nt + s] = base * idle[t - s];
                    }
                }
            }
        }
        Ok(MatchInstance::new(ni, nj, nt, lambda, mu, rewards)?)
    }
}

/// Draws a market for `config`.
pub fn generate_market<R: Rng + ?Sized>(
    config: &ExperimentConfig,
    rng: &mut R,
) -> Result<GeneratedScenario, ExperimentError> {
    let draw = draw_scenario(config, rng);
    let instance = draw.build(config)?;
    Ok(GeneratedScenario { instance, draw })
}
