use prophet_match::experiments::{
    confidence_interval, render_csv, reproduce_tables, run_benchmark, run_benchmark_on, scenario_for, ExperimentConfig,
    SweepParam, SweepPoint,
};
use prophet_match::matching::{run_online, sample_realization, MatchInstance, RoutingPlan};
use prophet_match::seed::rng_for;
use prophet_match::derive_seed;

fn small() -> ExperimentConfig {
    ExperimentConfig {
        demand_types: 3,
        supply_types: 3,
        horizon: 8,
        replicates: 24,
        n_inner_paths: 6,
        master_seed: 9,
        sweep: vec![],
        ..ExperimentConfig::desk()
    }
}

#[test]
fn same_config_gives_same_report() {
    let cfg = small();
    assert_eq!(run_benchmark(&cfg).unwrap(), run_benchmark(&cfg).unwrap());
    let other = ExperimentConfig { scenario: 1, ..cfg.clone() };
    assert_ne!(run_benchmark(&cfg).unwrap().lp_objective, run_benchmark(&other).unwrap().lp_objective);
}

#[test]
fn online_mean_matches_a_sequential_rerun() {
    let cfg = small();
    let report = run_benchmark(&cfg).unwrap();
    let inst = scenario_for(&cfg).build(&cfg).unwrap();
    let plan = RoutingPlan::solve(&inst).unwrap();
    let mut total = 0.0;
    for rep in 0..cfg.replicates as u64 {
        let real = sample_realization(&inst, &mut rng_for(cfg.master_seed, &[2, cfg.scenario, rep]));
        let seed = derive_seed(cfg.master_seed, &[3, cfg.scenario, rep]);
        total += run_online(&inst, &plan, &real, cfg.n_inner_paths, seed).unwrap().total_reward;
    }
    let on = report.policy("ON").unwrap();
    assert!((on.mean_reward - total / cfg.replicates as f64).abs() < 1e-12);
    assert!((on.ratio - on.mean_reward / report.lp_objective).abs() < 1e-12);
    for p in &report.policies {
        assert!(p.mean_reward <= report.offline_mean + 1e-9, "{}", p.name);
    }
    assert!(report.offline_mean <= report.lp_objective * 1.5);
}

#[test]
fn zero_rewards_give_zero_ratios() {
    let cfg = small();
    let (i, j, t) = (cfg.demand_types, cfg.supply_types, cfg.horizon);
    let inst = MatchInstance::new(i, j, t, vec![0.5 / i as f64; i * t], vec![0.5 / j as f64; j * t], vec![0.0; i * j * t * t])
        .unwrap();
    let report = run_benchmark_on(&cfg, &inst, "flat").unwrap();
    assert!(report.lp_zero);
    assert_eq!(report.lp_objective, 0.0);
    for p in &report.policies {
        assert_eq!(p.ratio, 0.0);
        assert_eq!(p.mean_reward, 0.0);
    }
}

#[test]
fn default_sweep_adds_sixteen_rows() {
    let cfg = ExperimentConfig { replicates: 2, sweep: ExperimentConfig::default_sweep(), ..small() };
    let rows = reproduce_tables(&cfg).unwrap();
    assert_eq!(rows.len(), 17);
    assert_eq!(rows[0].label, "base");
    let csv = render_csv(&rows);
    assert_eq!(csv.lines().count(), 1 + 17 * 8);
}

#[test]
fn sweep_point_changes_only_its_parameter() {
    let cfg = small();
    let point = SweepPoint { param: SweepParam::Beta, value: 0.0 };
    let moved = cfg.with_point(point);
    assert_eq!(moved.beta, 0.0);
    assert_eq!(moved.alpha, cfg.alpha);
    assert_eq!(moved.omega, cfg.omega);
    // no distance penalty: a same-period match earns the raw quality
    let draw = scenario_for(&cfg);
    let flat = draw.build(&moved).unwrap();
    for i in 0..cfg.demand_types {
        for j in 0..cfg.supply_types {
            assert_eq!(flat.reward(i, j, 3, 3), draw.quality[i * cfg.supply_types + j], "({i},{j})");
        }
    }
}

#[test]
fn interval_uses_sample_deviation() {
    let (m, hw) = confidence_interval(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(m, 2.5);
    let sd = (5.0f64 / 3.0).sqrt();
    assert!((hw - 1.96 * sd / 2.0).abs() < 1e-12);
    assert!(confidence_interval(&[1.0]).is_err());
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(run_benchmark(&ExperimentConfig { replicates: 0, ..small() }).is_err());
    assert!(run_benchmark(&ExperimentConfig { margin_multipliers: vec![0.5], ..small() }).is_err());
    assert!(run_benchmark(&ExperimentConfig { horizon: 0, ..small() }).is_err());
}
