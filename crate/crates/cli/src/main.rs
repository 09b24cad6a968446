//! `prophet-match`: validate inputs, verify the threshold policy on scenario
//! trees, simulate the online matching algorithm, and run benchmarks.

mod locate;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use prophet_match::experiments::{
    render_csv, render_text, reproduce_tables, ExperimentConfig, ExperimentError, Geography, PolicyKind,
};
use prophet_match::flow::write_flows_csv;
use prophet_match::matching::{
    offline_value, run_bid_price, run_greedy, run_online, run_online_plus, sample_realization, MatchError,
    MatchInstance, MatchInstanceSpec, MatchTrace, RoutingPlan,
};
use prophet_match::prophet::{verify_tree, verify_tree_mc, PolicyError, ThresholdTable};
use prophet_match::scenario::{build_tree, tbar_upper_bound, ScenarioTree, TreeError, TreeSpec, DEFAULT_ENUMERATION_CAP};
use prophet_match::{derive_seed, seed::rng_for};

#[derive(Parser)]
#[command(name = "prophet-match", version, about = "Threshold policies for correlated prophet inequalities and online matching")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Master seed for every random draw (default 0; a benchmark config's
    /// `master_seed` applies when this is not given).
    #[arg(long, global = true, env = "PROPHET_MATCH_SEED")]
    seed: Option<u64>,
    /// Worker threads for replicate parallelism (default: logical cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for output files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario tree, matching instance or experiment config.
    Validate { file: PathBuf },
    /// Verify the threshold policy's guarantees on a scenario tree.
    ProphetVerify {
        file: PathBuf,
        /// Upper bound on path mass (default: the tree's maximum).
        #[arg(long)]
        tbar: Option<f64>,
        /// Estimate by simulation instead of enumerating paths.
        #[arg(long)]
        mc: bool,
        /// Outer sample paths in simulation mode.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Inner paths per threshold in simulation mode.
        #[arg(long, default_value_t = 100)]
        inner_paths: usize,
        /// Largest number of leaves to enumerate.
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
        cap: usize,
    },
    /// Simulate every policy on one realization of a matching instance.
    MatchingRun {
        file: PathBuf,
        /// Inner paths per admission threshold.
        #[arg(long, default_value_t = 100)]
        n_paths: usize,
        /// Margin multipliers of the resource-sharing variants.
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 1.3, 1.6, 2.0])]
        multipliers: Vec<f64>,
    },
    /// Run the policy benchmark described by an experiment config.
    Benchmark { file: PathBuf },
}

impl Common {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

/// Failure classes with their exit codes.
enum Failure {
    /// A check ran and failed.
    Check(String),
    /// The input could not be read or is malformed.
    Input(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.common.threads {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(2);
        }
    };
    let result = pool.install(|| match &cli.command {
        Command::Validate { file } => cmd_validate(file),
        Command::ProphetVerify {
            file,
            tbar,
            mc,
            samples,
            inner_paths,
            cap,
        } => cmd_prophet_verify(file, *tbar, *mc, *samples, *inner_paths, *cap, &cli.common),
        Command::MatchingRun {
            file,
            n_paths,
            multipliers,
        } => cmd_matching_run(file, *n_paths, multipliers, &cli.common),
        Command::Benchmark { file } => cmd_benchmark(file, &cli.common),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| anyhow!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
}

fn write_out(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// `path:line: message`, or `path: message` when the line is unknown.
fn at(path: &Path, line: Option<usize>, msg: impl std::fmt::Display) -> String {
    match line {
        Some(l) => format!("{}:{l}: {msg}", path.display()),
        None => format!("{}: {msg}", path.display()),
    }
}

enum InputKind {
    Tree,
    Instance,
    Config,
}

fn detect(value: &Value) -> InputKind {
    match value {
        Value::Object(m) if m.contains_key("nodes") => InputKind::Tree,
        Value::Object(m) if m.contains_key("lambda") || m.contains_key("mu") => InputKind::Instance,
        _ => InputKind::Config,
    }
}

fn tree_error_line(text: &str, spec: &TreeSpec, err: &TreeError) -> Option<usize> {
    let id = err.node()?;
    let idx = spec.nodes.iter().position(|n| n.id == id)?;
    locate::element_line(text, "nodes", idx)
}

fn load_tree(path: &Path, text: &str) -> Result<(TreeSpec, std::result::Result<ScenarioTree, String>)> {
    let spec: TreeSpec = parse(path, text)?;
    let tree = build_tree(&spec).map_err(|e| at(path, tree_error_line(text, &spec, &e), e));
    Ok((spec, tree))
}

fn instance_error_line(text: &str, spec: &MatchInstanceSpec, err: &MatchError) -> Option<usize> {
    let reward_line = |i: usize, j: usize, t: usize, s: usize| {
        let idx = spec.rewards.iter().position(|e| (e.i, e.j, e.t, e.s) == (i, j, t, s))?;
        locate::element_line(text, "rewards", idx)
    };
    match *err {
        MatchError::InvalidRate { side, ty, period, .. } => locate::nested_element_line(text, side, period, ty),
        MatchError::RateSumExceeded { side, period, .. } => locate::element_line(text, side, period),
        MatchError::InvalidReward { i, j, t, s, .. } | MatchError::FutureReward { i, j, t, s } => {
            reward_line(i, j, t, s)
        }
        _ => None,
    }
}

fn load_instance(path: &Path, text: &str) -> Result<std::result::Result<MatchInstance, String>> {
    let spec: MatchInstanceSpec = parse(path, text)?;
    Ok(MatchInstance::from_spec(&spec).map_err(|e| at(path, instance_error_line(text, &spec, &e), e)))
}

/// Reads an experiment config, resolving `coordinates_file` relative to the
/// config's directory.
fn load_config(path: &Path, text: &str) -> Result<ExperimentConfig> {
    let mut value: Value = parse(path, text)?;
    if let Some(obj) = value.as_object_mut() {
        if let Some(file) = obj.remove("coordinates_file") {
            let rel = file.as_str().ok_or_else(|| anyhow!("{}: coordinates_file must be a string", path.display()))?;
            let coord_path = path.parent().unwrap_or(Path::new(".")).join(rel);
            let geo: Geography = parse(&coord_path, &read(&coord_path)?)?;
            obj.insert("coordinates".into(), serde_json::to_value(geo)?);
        }
    }
    serde_json::from_value(value).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn cmd_validate(path: &Path) -> std::result::Result<(), Failure> {
    let text = read(path)?;
    let value: Value = parse(path, &text)?;
    match detect(&value) {
        InputKind::Tree => {
            let tree = load_tree(path, &text)?.1.map_err(Failure::Check)?;
            println!(
                "{}: valid scenario tree ({} nodes, {} leaves, horizon {}, max path mass {})",
                path.display(),
                tree.len(),
                tree.num_leaves(),
                tree.horizon(),
                tbar_upper_bound(&tree)
            );
        }
        InputKind::Instance => {
            let inst = load_instance(path, &text)?.map_err(Failure::Check)?;
            println!(
                "{}: valid matching instance ({} demand types, {} supply types, horizon {})",
                path.display(),
                inst.num_demand_types(),
                inst.num_supply_types(),
                inst.horizon()
            );
        }
        InputKind::Config => {
            let config = load_config(path, &text)?;
            config.validate().map_err(|e| Failure::Check(at(path, None, e)))?;
            println!(
                "{}: valid experiment config ({} x {} types, horizon {}, {} replicates, {} sweep rows)",
                path.display(),
                config.demand_types,
                config.supply_types,
                config.horizon,
                config.replicates,
                config.sweep.len()
            );
        }
    }
    Ok(())
}

/// Threshold replaced at one node, for negative controls.
#[derive(Debug, Deserialize)]
struct ThresholdOverride {
    node: u64,
    h: f64,
}

#[derive(Debug, Deserialize)]
struct VerifyExtras {
    #[serde(default)]
    threshold_overrides: Vec<ThresholdOverride>,
}

fn cmd_prophet_verify(
    path: &Path,
    tbar: Option<f64>,
    mc: bool,
    samples: usize,
    inner_paths: usize,
    cap: usize,
    common: &Common,
) -> std::result::Result<(), Failure> {
    let text = read(path)?;
    let tree = load_tree(path, &text)?.1.map_err(|e| Failure::Input(anyhow!(e)))?;
    let extras: VerifyExtras = parse(path, &text)?;
    let verify_err = |e: PolicyError| match e {
        PolicyError::Tree(TreeError::TooLarge { leaves, cap }) => Failure::Input(anyhow!(
            "{}: tree has {leaves} leaves, more than the enumeration cap {cap}; rerun with --mc",
            path.display()
        )),
        e => Failure::Input(anyhow!("{}: {e}", path.display())),
    };

    let (json, passed) = if mc {
        if !extras.threshold_overrides.is_empty() {
            return Err(Failure::Input(anyhow!("threshold_overrides apply to exact verification only")));
        }
        let mut rng = rng_for(common.seed(), &[]);
        let report = verify_tree_mc(&tree, tbar, samples, inner_paths, &mut rng).map_err(verify_err)?;
        (to_json(&report), report.passed)
    } else {
        let table = if extras.threshold_overrides.is_empty() {
            None
        } else {
            let bound = tbar.unwrap_or_else(|| tbar_upper_bound(&tree));
            let mut table = ThresholdTable::exact(&tree, bound).map_err(verify_err)?;
            for o in &extras.threshold_overrides {
                let k = tree
                    .index_of(o.node)
                    .ok_or_else(|| anyhow!("{}: threshold override for unknown node {}", path.display(), o.node))?;
                table.set(k, o.h);
            }
            Some(table)
        };
        let report = verify_tree(&tree, tbar, table.as_ref(), cap).map_err(verify_err)?;
        (to_json(&report), report.passed)
    };
    print!("{json}");
    if let Some(dir) = &common.out {
        write_out(dir, "prophet_report.json", json.as_bytes())?;
    }
    if passed {
        Ok(())
    } else {
        Err(Failure::Check(format!("{}: verification failed", path.display())))
    }
}

#[derive(Serialize)]
struct PolicySummary {
    policy: String,
    total_reward: f64,
    matches: usize,
}

#[derive(Serialize)]
struct RunSummary {
    seed: u64,
    lp_objective: f64,
    offline_value: f64,
    demand_arrivals: usize,
    supply_arrivals: usize,
    policies: Vec<PolicySummary>,
}

fn trace_file_name(kind: &PolicyKind) -> String {
    match kind {
        PolicyKind::OnlinePlus { index, .. } => format!("trace_on_plus_{index}.csv"),
        k => format!("trace_{}.csv", k.name().to_lowercase()),
    }
}

fn cmd_matching_run(path: &Path, n_paths: usize, multipliers: &[f64], common: &Common) -> std::result::Result<(), Failure> {
    let text = read(path)?;
    let inst = load_instance(path, &text)?.map_err(|e| Failure::Input(anyhow!(e)))?;
    let lp = inst.lp3();
    let sol = prophet_match::flow::solve_lp3(&lp).map_err(|e| anyhow!(e))?;
    let plan = RoutingPlan::from_solution(&inst, &lp, &sol);
    let mut rng = rng_for(common.seed(), &[0]);
    let real = sample_realization(&inst, &mut rng);
    let threshold_seed = derive_seed(common.seed(), &[1]);

    let mut traces: Vec<(PolicyKind, MatchTrace)> = Vec::new();
    for kind in PolicyKind::lineup(multipliers) {
        let trace = match kind {
            PolicyKind::Online => run_online(&inst, &plan, &real, n_paths, threshold_seed),
            PolicyKind::Greedy => Ok(run_greedy(&inst, &real)),
            PolicyKind::BidPrice => Ok(run_bid_price(&inst, &plan, &real)),
            PolicyKind::OnlinePlus { multiplier, .. } => {
                run_online_plus(&inst, &plan, &real, n_paths, multiplier, threshold_seed)
            }
        }
        .map_err(|e| match e {
            MatchError::Consistency(msg) => Failure::Check(format!("{}: {}", kind.name(), msg)),
            e => Failure::Input(anyhow!(e)),
        })?;
        traces.push((kind, trace));
    }
    let summary = RunSummary {
        seed: common.seed(),
        lp_objective: sol.objective,
        offline_value: offline_value(&inst, &real).map_err(|e| anyhow!(e))?,
        demand_arrivals: real.demand.iter().flatten().count(),
        supply_arrivals: real.supply.iter().flatten().count(),
        policies: traces
            .iter()
            .map(|(k, t)| PolicySummary {
                policy: k.name(),
                total_reward: t.total_reward,
                matches: t.matches.len(),
            })
            .collect(),
    };
    let json = to_json(&summary);
    print!("{json}");
    if let Some(dir) = &common.out {
        write_out(dir, "summary.json", json.as_bytes())?;
        let mut flows = Vec::new();
        write_flows_csv(&lp, &sol, &mut flows).map_err(|e| anyhow!(e))?;
        write_out(dir, "plan.csv", &flows)?;
        for (kind, trace) in &traces {
            let mut buf = Vec::new();
            trace.write_csv(&mut buf).map_err(|e| anyhow!(e))?;
            write_out(dir, &trace_file_name(kind), &buf)?;
        }
    }
    Ok(())
}

fn cmd_benchmark(path: &Path, common: &Common) -> std::result::Result<(), Failure> {
    let text = read(path)?;
    let mut config = load_config(path, &text)?;
    if let Some(seed) = common.seed {
        config.master_seed = seed;
    }
    let rows = reproduce_tables(&config).map_err(|e| match e {
        ExperimentError::Replicate {
            index,
            source: MatchError::Consistency(msg),
        } => Failure::Check(format!("replicate {index}: {msg}")),
        e @ ExperimentError::Config(_) => Failure::Input(anyhow!("{}: {e}", path.display())),
        e => Failure::Input(anyhow!(e)),
    })?;
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    write_out(&dir, "report.csv", render_csv(&rows).as_bytes())?;
    write_out(&dir, "report.txt", render_text(&rows).as_bytes())?;
    print!("{}", render_text(&rows[..1]));
    Ok(())
}
