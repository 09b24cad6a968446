//! Flow solver against independent oracles: vertex enumeration of the LP
//! polytope and brute-force enumeration of matchings.

use nalgebra::{DMatrix, DVector};
use prophet_match::flow::{solve_lp3, solve_offline_matching, verify_solution, BipartiteLpInstance, Slot};
use prophet_match::SimRng;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

/// Random instance with few enough edges for vertex enumeration.
fn random_lp(rng: &mut SimRng, max_edges: usize) -> BipartiteLpInstance {
    let mut inst = BipartiteLpInstance::new();
    let nd = rng.random_range(1..=3);
    let ns = rng.random_range(1..=3);
    for k in 0..nd {
        inst.add_demand(Slot { ty: k, period: 2 }, rng.random_range(0.0..1.0)).unwrap();
    }
    for k in 0..ns {
        inst.add_supply(Slot { ty: k, period: rng.random_range(0..=2) }, rng.random_range(0.0..1.0)).unwrap();
    }
    for d in 0..nd {
        for s in 0..ns {
            if inst.edges.len() < max_edges && rng.random_bool(0.7) {
                let r = rng.random_range(-0.5..3.0);
                let cap = if rng.random_bool(0.5) { rng.random_range(0.0..0.8) } else { 10.0 };
                inst.add_edge(d, s, r, cap).unwrap();
            }
        }
    }
    inst
}

/// Optimum by enumerating every basis: choose `E` tight constraints from
/// `A x <= b`, solve, keep feasible points.
fn vertex_optimum(inst: &BipartiteLpInstance) -> f64 {
    let n = inst.edges.len();
    if n == 0 {
        return 0.0;
    }
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (d, &cap) in inst.demand_caps.iter().enumerate() {
        rows.push((inst.edges.iter().map(|e| f64::from(u8::from(e.demand == d))).collect(), cap));
    }
    for (s, &cap) in inst.supply_caps.iter().enumerate() {
        rows.push((inst.edges.iter().map(|e| f64::from(u8::from(e.supply == s))).collect(), cap));
    }
    for (k, e) in inst.edges.iter().enumerate() {
        let mut up = vec![0.0; n];
        up[k] = 1.0;
        rows.push((up.clone(), e.cap));
        up[k] = -1.0;
        rows.push((up, 0.0));
    }
    let m = rows.len();
    let mut best = f64::NEG_INFINITY;
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        let a = DMatrix::from_fn(n, n, |i, j| rows[pick[i]].0[j]);
        let b = DVector::from_fn(n, |i, _| rows[pick[i]].1);
        if let Some(x) = a.lu().solve(&b) {
            let feasible = rows
                .iter()
                .all(|(row, rhs)| row.iter().zip(x.iter()).map(|(a, x)| a * x).sum::<f64>() <= rhs + 1e-9);
            if feasible {
                let obj: f64 = inst.edges.iter().zip(x.iter()).map(|(e, x)| e.reward * x).sum();
                best = best.max(obj);
            }
        }
        // next n-combination of 0..m
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < m - n + i {
                break;
            }
        }
        pick[i] += 1;
        for j in i + 1..n {
            pick[j] = pick[j - 1] + 1;
        }
    }
}

/// Best matching value by trying every partner (or none) for each demand unit.
fn brute_matching(demand: &[Slot], supply: &[Slot], w: &dyn Fn(Slot, Slot) -> f64) -> f64 {
    fn go(d: usize, used: &mut Vec<bool>, demand: &[Slot], supply: &[Slot], w: &dyn Fn(Slot, Slot) -> f64) -> f64 {
        if d == demand.len() {
            return 0.0;
        }
        let mut best = go(d + 1, used, demand, supply, w);
        for s in 0..supply.len() {
            if !used[s] && supply[s].period <= demand[d].period {
                used[s] = true;
                best = best.max(w(demand[d], supply[s]) + go(d + 1, used, demand, supply, w));
                used[s] = false;
            }
        }
        best
    }
    go(0, &mut vec![false; supply.len()], demand, supply, w)
}

#[test]
fn lp_optimum_matches_vertex_enumeration() {
    let mut rng = SimRng::seed_from_u64(17);
    for _ in 0..150 {
        let inst = random_lp(&mut rng, 6);
        let sol = solve_lp3(&inst).unwrap();
        let oracle = vertex_optimum(&inst);
        assert!((sol.objective - oracle).abs() < 1e-9, "{} vs {oracle}", sol.objective);
        assert!(sol.is_certified(), "{:?}", sol.residuals);
    }
}

#[test]
fn duals_certify_optimality_on_larger_instances() {
    let mut rng = SimRng::seed_from_u64(3);
    for _ in 0..50 {
        let mut inst = BipartiteLpInstance::new();
        let (nd, ns) = (rng.random_range(1..25), rng.random_range(1..25));
        for k in 0..nd {
            inst.add_demand(Slot { ty: k, period: rng.random_range(0..10) }, rng.random_range(0.0..1.0)).unwrap();
        }
        for k in 0..ns {
            inst.add_supply(Slot { ty: k, period: rng.random_range(0..10) }, rng.random_range(0.0..1.0)).unwrap();
        }
        for d in 0..nd {
            for s in 0..ns {
                if inst.supply[s].period <= inst.demand[d].period {
                    let cap = inst.demand_caps[d] * inst.supply_caps[s];
                    inst.add_edge(d, s, rng.random_range(-1.0..2.0), cap).unwrap();
                }
            }
        }
        let sol = solve_lp3(&inst).unwrap();
        let res = verify_solution(&inst, &sol);
        assert!(res.duality_gap <= 1e-7 * (1.0 + sol.objective.abs()), "{res:?}");
        assert!(res.primal_violation <= 1e-9 && res.dual_violation <= 1e-9, "{res:?}");
    }
}

#[test]
fn offline_matching_matches_brute_force() {
    let mut rng = SimRng::seed_from_u64(8);
    for _ in 0..200 {
        let nd = rng.random_range(0..=5);
        let ns = rng.random_range(0..=5);
        let demand: Vec<Slot> = (0..nd).map(|k| Slot { ty: k % 2, period: rng.random_range(0..4) }).collect();
        let supply: Vec<Slot> = (0..ns).map(|k| Slot { ty: k % 3, period: rng.random_range(0..4) }).collect();
        let table: Vec<f64> = (0..36).map(|_| (rng.random_range(-2i32..6) as f64) * 0.5).collect();
        let w = |d: Slot, s: Slot| table[(d.ty * 3 + s.ty) * 6 + d.period.abs_diff(s.period)];
        let (_, sol) = solve_offline_matching(&demand, &supply, w).unwrap();
        let oracle = brute_matching(&demand, &supply, &w);
        assert!((sol.objective - oracle).abs() < 1e-9, "{} vs {oracle}", sol.objective);
        // integral flows
        for &x in &sol.flows {
            assert!(x.abs() < 1e-9 || (x - 1.0).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solutions_are_feasible(seed in any::<u64>()) {
        let inst = random_lp(&mut SimRng::seed_from_u64(seed), 9);
        let sol = solve_lp3(&inst).unwrap();
        let res = verify_solution(&inst, &sol);
        prop_assert!(res.primal_violation <= 1e-9);
        prop_assert!(sol.is_certified());
        for (d, &cap) in inst.demand_caps.iter().enumerate() {
            let used: f64 = inst.edges.iter().zip(&sol.flows).filter(|(e, _)| e.demand == d).map(|(_, x)| x).sum();
            prop_assert!(used <= cap + 1e-9);
        }
    }

    #[test]
    fn scaling_rewards_scales_objective(seed in any::<u64>(), c in 0.1f64..10.0) {
        let inst = random_lp(&mut SimRng::seed_from_u64(seed), 9);
        let mut scaled = inst.clone();
        for e in &mut scaled.edges {
            e.reward *= c;
        }
        let a = solve_lp3(&inst).unwrap().objective;
        let b = solve_lp3(&scaled).unwrap().objective;
        prop_assert!((b - c * a).abs() <= 1e-9 * (1.0 + b.abs()));
    }
}
