//! Exact prophet-policy values checked against brute-force enumeration of
//! every (path, arrival outcome) pair.

use prophet_match::prophet::{
    check_optional_stopping, check_submartingale, expected_offline_value, ratio_lemma_check, reward_mass_bound,
    run_stp_with_table, stp_value_recursion, stp_values, threshold_mc, verify_tree, ThresholdTable,
};
use prophet_match::scenario::{
    random_tree, random_unit_mass_tree, tbar_upper_bound, RandomTreeParams, SamplePath, ScenarioTree,
    DEFAULT_ENUMERATION_CAP as CAP,
};
use prophet_match::SimRng;
use proptest::prelude::*;
use rand::SeedableRng;

/// Thresholds from their definition: expected future reward mass over
/// `1 + tbar - mass so far`, by direct recursion over the subtree.
fn oracle_thresholds(tree: &ScenarioTree, tbar: f64) -> Vec<f64> {
    fn future(tree: &ScenarioTree, k: usize) -> f64 {
        tree.children(k)
            .iter()
            .map(|&c| {
                let n = tree.node(c);
                let here: f64 = n.arrival_probs.iter().zip(&n.rewards).map(|(p, r)| p * r).sum();
                n.branch_prob * (here + future(tree, c))
            })
            .sum()
    }
    fn mass(tree: &ScenarioTree, k: usize) -> f64 {
        let own: f64 = tree.node(k).arrival_probs.iter().sum();
        own + tree.node(k).parent.map_or(0.0, |p| mass(tree, p))
    }
    (0..tree.len()).map(|k| future(tree, k) / (1.0 + tbar - mass(tree, k))).collect()
}

struct Outcome {
    prob: f64,
    stp: f64,
    offline: f64,
    mass_reward: f64,
}

/// Every path and every arrival pattern along it, with the reward the
/// policy earns when it accepts the first arrival meeting `h`.
fn enumerate_outcomes(tree: &ScenarioTree, h: &[f64]) -> Vec<Outcome> {
    let mut out = Vec::new();
    fn walk(
        tree: &ScenarioTree,
        h: &[f64],
        k: usize,
        prob: f64,
        sold: Option<f64>,
        best: f64,
        mass_reward: f64,
        out: &mut Vec<Outcome>,
    ) {
        let kids = tree.children(k);
        if kids.is_empty() {
            out.push(Outcome {
                prob,
                stp: sold.unwrap_or(0.0),
                offline: best,
                mass_reward,
            });
            return;
        }
        for &c in kids {
            let n = tree.node(c);
            let bp = prob * n.branch_prob;
            let here: f64 = n.arrival_probs.iter().zip(&n.rewards).map(|(p, r)| p * r).sum();
            let none = 1.0 - n.arrival_probs.iter().sum::<f64>();
            for (i, &p) in n.arrival_probs.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let r = n.rewards[i];
                let s = sold.or(if r >= h[c] { Some(r) } else { None });
                walk(tree, h, c, bp * p, s, best.max(r), mass_reward + here, out);
            }
            if none > 0.0 {
                walk(tree, h, c, bp * none, sold, best, mass_reward + here, out);
            }
        }
    }
    walk(tree, h, tree.root(), 1.0, None, 0.0, 0.0, &mut out);
    out
}

fn small_params() -> RandomTreeParams {
    RandomTreeParams {
        max_horizon: 4,
        max_branches: 3,
        max_types: 3,
        ..RandomTreeParams::default()
    }
}

#[test]
fn exact_values_match_outcome_enumeration() {
    let mut rng = SimRng::seed_from_u64(2024);
    for _ in 0..60 {
        let tree = random_tree(&small_params(), &mut rng);
        let tbar = tbar_upper_bound(&tree);
        let h = oracle_thresholds(&tree, tbar);
        let table = ThresholdTable::exact(&tree, tbar).unwrap();
        for (k, (&a, &b)) in table.values().iter().zip(&h).enumerate() {
            assert!((a - b).abs() < 1e-12, "node {k}: {a} vs {b}");
        }
        let outcomes = enumerate_outcomes(&tree, &h);
        let total: f64 = outcomes.iter().map(|o| o.prob).sum();
        assert!((total - 1.0).abs() < 1e-9);
        let stp: f64 = outcomes.iter().map(|o| o.prob * o.stp).sum();
        let off: f64 = outcomes.iter().map(|o| o.prob * o.offline).sum();
        let mass: f64 = outcomes.iter().map(|o| o.prob * o.mass_reward).sum();

        let report = verify_tree(&tree, None, None, CAP).unwrap();
        assert!((report.e_v_stp - stp).abs() < 1e-9, "{} vs {stp}", report.e_v_stp);
        assert!((report.e_v_off - off).abs() < 1e-9, "{} vs {off}", report.e_v_off);
        assert!((report.reward_mass_bound - mass).abs() < 1e-9);
        assert!((expected_offline_value(&tree, CAP).unwrap() - off).abs() < 1e-9);
        assert!((reward_mass_bound(&tree, CAP).unwrap() - mass).abs() < 1e-9);
        assert!((stp_value_recursion(&tree, tree.root(), tbar, CAP).unwrap() - stp).abs() < 1e-9);
        assert!((stp_values(&tree, &table)[tree.root()] - stp).abs() < 1e-9);
    }
}

#[test]
fn runner_agrees_with_enumerated_outcomes() {
    let mut rng = SimRng::seed_from_u64(7);
    for _ in 0..20 {
        let tree = random_tree(&small_params(), &mut rng);
        let tbar = tbar_upper_bound(&tree);
        let table = ThresholdTable::exact(&tree, tbar).unwrap();
        // walk every path and arrival pattern through the runner
        fn rec(tree: &ScenarioTree, table: &ThresholdTable, nodes: Vec<usize>, arr: Vec<Option<usize>>, prob: f64, acc: &mut f64) {
            let last = *nodes.last().unwrap();
            if tree.is_leaf(last) {
                let trace = run_stp_with_table(tree, &SamplePath::with_arrivals(nodes, arr), table);
                *acc += prob * trace.reward;
                return;
            }
            for &c in tree.children(last) {
                let n = tree.node(c);
                let none = 1.0 - n.arrival_probs.iter().sum::<f64>();
                let mut options: Vec<(Option<usize>, f64)> =
                    n.arrival_probs.iter().enumerate().filter(|p| *p.1 > 0.0).map(|(i, &p)| (Some(i), p)).collect();
                if none > 0.0 {
                    options.push((None, none));
                }
                for (a, p) in options {
                    let (mut nn, mut aa) = (nodes.clone(), arr.clone());
                    nn.push(c);
                    aa.push(a);
                    rec(tree, table, nn, aa, prob * n.branch_prob * p, acc);
                }
            }
        }
        let mut acc = 0.0;
        rec(&tree, &table, vec![tree.root()], vec![None], 1.0, &mut acc);
        let exact = stp_values(&tree, &table)[tree.root()];
        assert!((acc - exact).abs() < 1e-9, "{acc} vs {exact}");
    }
}

#[test]
fn simulated_threshold_is_unbiased() {
    let mut rng = SimRng::seed_from_u64(99);
    let tree = loop {
        let t = random_tree(&small_params(), &mut rng);
        if t.horizon() >= 3 && t.len() > 6 {
            break t;
        }
    };
    let tbar = tbar_upper_bound(&tree);
    let exact = ThresholdTable::exact(&tree, tbar).unwrap();
    for k in 0..tree.len() {
        let est = threshold_mc(&tree, k, tbar, 20_000, &mut rng).unwrap();
        let tol = 4.0 * est.stderr + 1e-12;
        assert!((est.value - exact.get(k)).abs() <= tol, "node {k}: {} vs {}", est.value, exact.get(k));
    }
}

#[test]
fn unit_mass_trees_earn_half_the_reward_mass() {
    let mut rng = SimRng::seed_from_u64(31);
    for _ in 0..100 {
        let tree = random_unit_mass_tree(&small_params(), &mut rng);
        assert!((tbar_upper_bound(&tree) - 1.0).abs() < 1e-9);
        let report = verify_tree(&tree, Some(1.0), None, CAP).unwrap();
        assert!(report.e_v_stp >= 0.5 * report.reward_mass_bound - 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn guarantees_hold_on_random_trees(seed in any::<u64>(), slack in 0.0f64..2.0) {
        let tree = random_tree(&small_params(), &mut SimRng::seed_from_u64(seed));
        let tbar = tbar_upper_bound(&tree) + slack;
        let report = verify_tree(&tree, Some(tbar), None, CAP).unwrap();
        prop_assert!(report.e_v_stp >= report.reward_mass_bound / (1.0 + tbar) - 1e-9);
        prop_assert!(report.e_v_stp <= report.e_v_off + 1e-9);
        prop_assert!(report.e_v_off <= report.reward_mass_bound + 1e-9);
        prop_assert!(check_submartingale(&tree, tbar, CAP).unwrap() <= 1e-9);
        prop_assert!(check_optional_stopping(&tree, tbar, CAP).unwrap().gap() <= 1e-9);
        prop_assert!(report.passed);
    }

    #[test]
    fn thresholds_fall_as_the_bound_grows(seed in any::<u64>(), extra in 0.01f64..3.0) {
        let tree = random_tree(&small_params(), &mut SimRng::seed_from_u64(seed));
        let tbar = tbar_upper_bound(&tree);
        let a = ThresholdTable::exact(&tree, tbar).unwrap();
        let b = ThresholdTable::exact(&tree, tbar + extra).unwrap();
        for k in 0..tree.len() {
            prop_assert!(b.get(k) <= a.get(k) + 1e-15);
            prop_assert!(a.get(k) >= 0.0);
        }
        for k in tree.leaves() {
            prop_assert_eq!(a.get(k), 0.0);
        }
    }

    #[test]
    fn ratio_lemma(a in 0.0f64..10.0, b in 1.0f64..10.0, pr in proptest::collection::vec((0.0f64..2.0, 0.0f64..10.0), 0..8)) {
        let (p, r): (Vec<f64>, Vec<f64>) = pr.into_iter().unzip();
        prop_assert!(ratio_lemma_check(a, b, &p, &r).unwrap());
    }
}

#[test]
fn ratio_lemma_rejects_bad_domain() {
    assert!(ratio_lemma_check(1.0, 0.5, &[], &[]).is_err());
    assert!(ratio_lemma_check(-1.0, 1.0, &[], &[]).is_err());
    assert!(ratio_lemma_check(1.0, 1.0, &[0.1], &[]).is_err());
    assert!(ratio_lemma_check(1.0, 1.0, &[-0.1], &[1.0]).is_err());
}
