use rand::Rng;

use super::plan::{separation_probs, RoutingPlan};
use super::{MatchError, MatchInstance};
use crate::scenario::sample_arrival;
use crate::stats::Welford;

/// Monte Carlo mean and standard error of `p_ijts(S_t)` over supply
/// realizations, for one edge `(i, j, t, s)`. The bound to compare against
/// is `0.5 * x*_ijts`.
pub fn check_separation_bound<R: Rng + ?Sized>(
    inst: &MatchInstance,
    plan: &RoutingPlan,
    edge: (usize, usize, usize, usize),
    n_samples: usize,
    rng: &mut R,
) -> Result<(f64, f64), MatchError> {
    let (i, j, t, s) = edge;
    if n_samples == 0 {
        return Err(MatchError::InvalidSampleCount(0));
    }
    let mut acc = Welford::new();
    let mut supply = vec![None; t + 1];
    for _ in 0..n_samples {
        for (p, slot) in supply.iter_mut().enumerate() {
            let v: f64 = rng.random();
            *slot = sample_arrival(inst.mu_row(p), v);
        }
        let p = separation_probs(inst, plan, &supply, i, t)
            .into_iter()
            .find(|&(jj, ss, _)| jj == j && ss == s)
            .map_or(0.0, |e| e.2);
        acc.push(p);
    }
    Ok((acc.mean(), acc.stderr()))
}

/// `E[p_ijts(S_t)]` by enumerating the supply arrivals of the periods that
/// `(i, t)` routes to. Exponential in that number of periods.
pub fn separation_mean_exact(
    inst: &MatchInstance,
    plan: &RoutingPlan,
    edge: (usize, usize, usize, usize),
) -> f64 {
    let (i, j, t, s) = edge;
    let mut periods: Vec<usize> = plan.routes(i, t).iter().map(|e| e.s).collect();
    periods.sort_unstable();
    periods.dedup();
    let mut supply = vec![None; t + 1];
    fn go(
        k: usize,
        prob: f64,
        periods: &[usize],
        supply: &mut [Option<usize>],
        f: &mut dyn FnMut(&[Option<usize>], f64),
        inst: &MatchInstance,
    ) {
        if k == periods.len() {
            f(supply, prob);
            return;
        }
        let p = periods[k];
        let row = inst.mu_row(p);
        let rest = 1.0 - row.iter().sum::<f64>();
        for (jj, &m) in row.iter().enumerate() {
            supply[p] = Some(jj);
            go(k + 1, prob * m, periods, supply, f, inst);
        }
        supply[p] = None;
        if rest > 0.0 {
            go(k + 1, prob * rest, periods, supply, f, inst);
        }
    }
    let mut total = 0.0;
    go(
        0,
        1.0,
        &periods,
        &mut supply,
        &mut |sup, prob| {
            let p = separation_probs(inst, plan, sup, i, t)
                .into_iter()
                .find(|&(jj, ss, _)| jj == j && ss == s)
                .map_or(0.0, |e| e.2);
            total += prob * p;
        },
        inst,
    );
    total
}

/// `min(lambda, x) / x >= 1 - x / (4 lambda)` up to 1e-12.
pub fn lemma4_check(lambda: f64, x: f64) -> Result<bool, MatchError> {
    if !(lambda.is_finite() && lambda > 0.0 && x.is_finite() && x > 0.0) {
        return Err(MatchError::Domain(format!(
            "need lambda > 0 and x > 0, got lambda = {lambda}, x = {x}"
        )));
    }
    Ok(lambda.min(x) / x >= 1.0 - x / (4.0 * lambda) - 1e-12)
}
