use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prophet-match"))
        .args(args)
        .env_remove("PROPHET_MATCH_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_accepts_each_input_kind() {
    for f in ["chain.json", "branching.json", "small_market.json", "tiny_benchmark.json"] {
        let o = run(&["validate", path(&fixture(f))]);
        assert_eq!(o.status.code(), Some(0), "{f}: {}", stderr(&o));
        assert!(stdout(&o).contains("valid"));
    }
}

#[test]
fn validate_names_the_bad_node_and_line() {
    let o = run(&["validate", path(&fixture("bad_branch.json"))]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("bad_branch.json:6:"), "{err}");
    assert!(err.contains("node 1: branch probabilities sum 0.9"), "{err}");
}

#[test]
fn validate_points_at_the_offending_reward() {
    let o = run(&["validate", path(&fixture("bad_market.json"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad_market.json:9:"), "{}", stderr(&o));
}

#[test]
fn missing_and_malformed_inputs_exit_2() {
    let o = run(&["validate", "/definitely/not/here.json"]);
    assert_eq!(o.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("broken.json");
    std::fs::write(&bad, "{\n  \"horizon\": 2,\n  \"nodes\": [\n    {\"id\": 0,,}\n  ]\n}\n").unwrap();
    let o = run(&["validate", path(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("broken.json:4:"), "{}", stderr(&o));

    let cfg = dir.path().join("typo.json");
    std::fs::write(&cfg, r#"{"replicats": 3}"#).unwrap();
    assert_eq!(run(&["validate", path(&cfg)]).status.code(), Some(2));

    let cfg = dir.path().join("zero.json");
    std::fs::write(&cfg, r#"{"replicates": 0}"#).unwrap();
    assert_eq!(run(&["validate", path(&cfg)]).status.code(), Some(1));
}

#[test]
fn prophet_verify_reports_chain_values() {
    let o = run(&["prophet-verify", path(&fixture("chain.json"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["ratio"].as_f64().unwrap(), 0.8);
    assert_eq!(v["e_v_off"].as_f64().unwrap(), 1.25);
    assert_eq!(v["passed"], Value::Bool(true));
}

#[test]
fn prophet_verify_tight_instance() {
    let o = run(&["prophet-verify", path(&fixture("tight_0.01.json"))]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["ratio_to_mass_bound"].as_f64().unwrap() - 1.0 / 1.99).abs() < 1e-9);
}

#[test]
fn corrupted_thresholds_fail_verification() {
    let o = run(&["prophet-verify", path(&fixture("chain_corrupted.json"))]);
    assert_eq!(o.status.code(), Some(1));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["submartingale_max_violation"].as_f64().unwrap() > 0.2);
}

#[test]
fn enumeration_cap_suggests_simulation() {
    let o = run(&["prophet-verify", "--cap", "2", path(&fixture("branching.json"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--mc"));
    let o = run(&["prophet-verify", "--mc", "--samples", "500", "--cap", "2", path(&fixture("branching.json"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn explicit_bound_below_path_mass_is_rejected() {
    let o = run(&["prophet-verify", "--tbar", "0.5", path(&fixture("chain.json"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn matching_run_writes_traces() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["matching-run", "--seed", "11", "--out", path(dir.path()), path(&fixture("small_market.json"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let names: Vec<&str> = v["policies"].as_array().unwrap().iter().map(|p| p["policy"].as_str().unwrap()).collect();
    assert_eq!(names, ["ON", "Greedy", "BPH", "ON+1", "ON+2", "ON+3", "ON+4"]);
    let offline = v["offline_value"].as_f64().unwrap();
    for p in v["policies"].as_array().unwrap() {
        assert!(p["total_reward"].as_f64().unwrap() <= offline + 1e-9);
    }
    let trace = std::fs::read_to_string(dir.path().join("trace_on.csv")).unwrap();
    assert!(trace.starts_with("period,event,i,j,s,reward,threshold,decision\n"));
    assert!(dir.path().join("trace_on_plus_4.csv").exists());
    let plan = std::fs::read_to_string(dir.path().join("plan.csv")).unwrap();
    assert!(plan.starts_with("i,j,t,s,x\n"));
}

#[test]
fn env_seed_matches_flag() {
    let m = fixture("small_market.json");
    let flag = run(&["matching-run", "--seed", "7", path(&m)]);
    let env = Command::new(env!("CARGO_BIN_EXE_prophet-match"))
        .args(["matching-run", path(&m)])
        .env("PROPHET_MATCH_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(flag.stdout, env.stdout);
    assert!(!run(&["matching-run", "--seed", "8", path(&m)]).stdout.is_empty());
}

#[test]
fn benchmark_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["benchmark", "--out", path(dir.path()), path(&fixture("tiny_benchmark.json"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let header = stdout(&o).lines().nth(1).unwrap().split_whitespace().collect::<Vec<_>>().join(" ");
    assert_eq!(header, "ON Greedy BPH ON+1 ON+2 ON+3 ON+4");
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    // header + (OFF + 7 policies) x (base + 2 sweep rows)
    assert_eq!(csv.lines().count(), 1 + 8 * 3);
    assert!(csv.contains("\nalpha = 0,ON,"));
    let txt = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(txt.contains("omega = 0.02"));
}

#[test]
fn single_replicate_omits_halfwidth() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["benchmark", "--out", path(dir.path()), path(&fixture("single_replicate.json"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let on = csv.lines().find(|l| l.starts_with("base,ON,")).unwrap();
    assert_eq!(on.split(',').nth(4), Some(""));
    assert!(!stdout(&o).contains("+/-"));
}

#[test]
fn benchmark_is_thread_count_independent() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = fixture("tiny_benchmark.json");
    let o1 = run(&["benchmark", "--threads", "1", "--out", path(a.path()), path(&cfg)]);
    let o4 = run(&["benchmark", "--threads", "4", "--out", path(b.path()), path(&cfg)]);
    assert_eq!(o1.stdout, o4.stdout);
    for f in ["report.csv", "report.txt"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
    let o = run(&["benchmark", "--seed", "6", "--out", path(b.path()), path(&cfg)]);
    assert_ne!(o.stdout, o1.stdout);
}

#[test]
fn coordinates_file_is_resolved_next_to_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("geo.json"),
        r#"{"demand": [[0.0, 0.0], [0.1, 0.1]], "supply": [[0.05, 0.0], [0.2, 0.2]]}"#,
    )
    .unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"I": 2, "J": 2, "T": 4, "replicates": 3, "n_inner_paths": 4, "sweep": [], "coordinates_file": "geo.json"}"#,
    )
    .unwrap();
    let o = run(&["validate", path(&cfg)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run(&["benchmark", "--out", path(dir.path()), path(&cfg)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}
