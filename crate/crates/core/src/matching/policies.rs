use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::admission::{ContinuationSet, SupplyState};
use super::plan::{separation_pick, separation_probs, RoutingPlan};
use super::{MatchError, MatchInstance, Realization};
use crate::flow::solve_offline_matching;
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    /// Separation picked no unit, or no unit qualified.
    NoPick,
    /// The picked unit's threshold exceeded the reward.
    Threshold,
    /// The picked unit was already matched.
    Unavailable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Arrived,
    Matched,
    Rejected(RejectReason),
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Arrived => "arrived",
            Decision::Matched => "matched",
            Decision::Rejected(RejectReason::NoPick) => "no-pick",
            Decision::Rejected(RejectReason::Threshold) => "threshold",
            Decision::Rejected(RejectReason::Unavailable) => "unavailable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    /// A supply unit arrived.
    Supply,
    /// A demand unit arrived and got its primary decision.
    Demand,
    /// Second chance for a customer the primary decision left unmatched.
    Fallback,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Supply => "supply",
            EventKind::Demand => "demand",
            EventKind::Fallback => "fallback",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchEvent {
    pub period: usize,
    pub kind: EventKind,
    pub i: Option<usize>,
    pub j: Option<usize>,
    pub s: Option<usize>,
    pub reward: Option<f64>,
    pub threshold: Option<f64>,
    pub decision: Decision,
}

/// Demand `(i, t)` matched to supply `(j, s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub i: usize,
    pub t: usize,
    pub j: usize,
    pub s: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchTrace {
    pub events: Vec<MatchEvent>,
    pub matches: Vec<Match>,
    pub total_reward: f64,
}

impl MatchTrace {
    fn supply(&mut self, period: usize, j: usize) {
        self.events.push(MatchEvent {
            period,
            kind: EventKind::Supply,
            i: None,
            j: Some(j),
            s: Some(period),
            reward: None,
            threshold: None,
            decision: Decision::Arrived,
        });
    }

    fn matched(&mut self, m: Match) {
        self.matches.push(m);
        self.total_reward += m.reward;
    }

    /// Writes `(period,event,i,j,s,reward,threshold,decision)` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["period", "event", "i", "j", "s", "reward", "threshold", "decision"])?;
        let opt = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
        let optf = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for e in &self.events {
            w.write_record([
                e.period.to_string(),
                e.kind.to_string(),
                opt(e.i),
                opt(e.j),
                opt(e.s),
                optf(e.reward),
                optf(e.threshold),
                e.decision.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Margin of an alternative unit in the resource-sharing fallback:
/// `r - multiplier * h`, the reward left after paying the scaled threshold.
pub fn fallback_margin(multiplier: f64, threshold: f64, reward: f64) -> f64 {
    reward - multiplier * threshold
}

fn run_threshold_policy(
    inst: &MatchInstance,
    plan: &RoutingPlan,
    real: &Realization,
    n_paths: usize,
    seed: u64,
    fallback: Option<f64>,
) -> Result<MatchTrace, MatchError> {
    let horizon = inst.horizon();
    let mut state = SupplyState::new(horizon);
    let mut trace = MatchTrace::default();
    for t in 0..horizon {
        if let Some(j) = real.supply[t] {
            state.arrive(t, j);
            trace.supply(t, j);
        }
        state.advance(inst, plan, &real.supply, t)?;
        let Some(i) = real.demand[t] else { continue };

        // one inner-simulation stream per period keeps policies on the same
        // realization in lockstep until their availability differs
        let mut cont: Option<ContinuationSet> = None;
        let continuations = |cont: &mut Option<ContinuationSet>| -> Result<(), MatchError> {
            if cont.is_none() {
                let mut rng = rng_for(seed, &[t as u64]);
                *cont = Some(ContinuationSet::sample(inst, plan, &real.supply, t, n_paths, &mut rng)?);
            }
            Ok(())
        };

        let probs = separation_probs(inst, plan, &real.supply, i, t);
        let pick = separation_pick(&probs, inst.lambda(i, t), real.pick_uniforms[t])?;
        let mut event = MatchEvent {
            period: t,
            kind: EventKind::Demand,
            i: Some(i),
            j: None,
            s: None,
            reward: None,
            threshold: None,
            decision: Decision::Rejected(RejectReason::NoPick),
        };
        let mut picked = None;
        if let Some((j, s)) = pick {
            picked = Some(s);
            let r = inst.reward(i, j, t, s);
            event.j = Some(j);
            event.s = Some(s);
            event.reward = Some(r);
            if !state.is_available(s) {
                event.decision = Decision::Rejected(RejectReason::Unavailable);
            } else {
                continuations(&mut cont)?;
                let past = state.unit(s).expect("picked unit arrived").past_mass;
                let h = cont.as_ref().expect("sampled").threshold(plan, j, s, past)?.value;
                event.threshold = Some(h);
                if r >= h {
                    event.decision = Decision::Matched;
                    state.take(s);
                    trace.matched(Match { i, t, j, s, reward: r });
                } else {
                    event.decision = Decision::Rejected(RejectReason::Threshold);
                }
            }
        }
        let rejected = matches!(event.decision, Decision::Rejected(_));
        trace.events.push(event);

        let Some(multiplier) = fallback else { continue };
        if !rejected {
            continue;
        }
        continuations(&mut cont)?;
        let cont = cont.as_ref().expect("sampled");
        let mut best: Option<(f64, usize, usize, f64, f64)> = None;
        for unit in state.available() {
            if Some(unit.s) == picked {
                continue;
            }
            let r = inst.reward(i, unit.j, t, unit.s);
            if r <= 0.0 {
                continue;
            }
            let h = cont.threshold(plan, unit.j, unit.s, unit.past_mass)?.value;
            let margin = fallback_margin(multiplier, h, r);
            if margin >= 0.0 && best.is_none_or(|b| margin > b.0) {
                best = Some((margin, unit.j, unit.s, r, h));
            }
        }
        let mut fb = MatchEvent {
            period: t,
            kind: EventKind::Fallback,
            i: Some(i),
            j: None,
            s: None,
            reward: None,
            threshold: None,
            decision: Decision::Rejected(RejectReason::NoPick),
        };
        if let Some((_, j, s, r, h)) = best {
            fb.j = Some(j);
            fb.s = Some(s);
            fb.reward = Some(r);
            fb.threshold = Some(h);
            fb.decision = Decision::Matched;
            state.take(s);
            trace.matched(Match { i, t, j, s, reward: r });
        }
        trace.events.push(fb);
    }
    Ok(trace)
}

/// The online matching algorithm (ON): separation, then the admission
/// threshold of the picked unit. `seed` drives the inner simulations.
pub fn run_online(
    inst: &MatchInstance,
    plan: &RoutingPlan,
    real: &Realization,
    n_paths: usize,
    seed: u64,
) -> Result<MatchTrace, MatchError> {
    run_threshold_policy(inst, plan, real, n_paths, seed, None)
}

/// ON with resource sharing: whenever ON would leave the customer unmatched
/// (no pick, picked unit gone, or threshold not met), match to another
/// available unit with the largest non-negative [`fallback_margin`] among
/// units with positive reward.
pub fn run_online_plus(
    inst: &MatchInstance,
    plan: &RoutingPlan,
    real: &Realization,
    n_paths: usize,
    margin_multiplier: f64,
    seed: u64,
) -> Result<MatchTrace, MatchError> {
    if !(margin_multiplier.is_finite() && margin_multiplier >= 1.0) {
        return Err(MatchError::InvalidMultiplier(margin_multiplier));
    }
    run_threshold_policy(inst, plan, real, n_paths, seed, Some(margin_multiplier))
}

/// Matches each demand unit to the available unit with the highest
/// `score(reward, j, s)`, provided the reward is positive and the score is
/// non-negative. Ties go to the earliest arrival.
fn run_scored<F>(inst: &MatchInstance, real: &Realization, score: F) -> MatchTrace
where
    F: Fn(f64, usize, usize) -> f64,
{
    let mut available: Vec<Option<usize>> = vec![None; inst.horizon()];
    let mut trace = MatchTrace::default();
    for t in 0..inst.horizon() {
        if let Some(j) = real.supply[t] {
            available[t] = Some(j);
            trace.supply(t, j);
        }
        let Some(i) = real.demand[t] else { continue };
        let mut best: Option<(f64, usize, usize, f64)> = None;
        for (s, a) in available.iter().enumerate().take(t + 1) {
            let Some(j) = *a else { continue };
            let r = inst.reward(i, j, t, s);
            let sc = score(r, j, s);
            if r > 0.0 && sc >= 0.0 && best.is_none_or(|b| sc > b.0) {
                best = Some((sc, j, s, r));
            }
        }
        let mut event = MatchEvent {
            period: t,
            kind: EventKind::Demand,
            i: Some(i),
            j: None,
            s: None,
            reward: None,
            threshold: None,
            decision: Decision::Rejected(RejectReason::NoPick),
        };
        if let Some((_, j, s, r)) = best {
            available[s] = None;
            event.j = Some(j);
            event.s = Some(s);
            event.reward = Some(r);
            event.decision = Decision::Matched;
            trace.matched(Match { i, t, j, s, reward: r });
        }
        trace.events.push(event);
    }
    trace
}

/// Always matches to the available unit with the highest positive reward.
pub fn run_greedy(inst: &MatchInstance, real: &Realization) -> MatchTrace {
    run_scored(inst, real, |r, _, _| r)
}

/// Matches to the available unit maximizing `r - dual(j, s)` when that is
/// non-negative, with the supply-capacity duals of the fluid relaxation.
pub fn run_bid_price(inst: &MatchInstance, plan: &RoutingPlan, real: &Realization) -> MatchTrace {
    run_scored(inst, real, |r, j, s| r - plan.supply_dual(j, s))
}

/// Hindsight optimum on a realization: the max-weight matching of realized
/// demand units to realized supply units that arrived no later.
pub fn offline_value(inst: &MatchInstance, real: &Realization) -> Result<f64, MatchError> {
    let (_, sol) = solve_offline_matching(&real.demand_slots(), &real.supply_slots(), |d, s| {
        inst.reward(d.ty, s.ty, d.period, s.period)
    })?;
    Ok(sol.objective)
}
