use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fedshare::experiment::{derive_seed, log_label, run_experiment, CoreRule, ExperimentConfig};
use fedshare::fairness::{evaluate_sample, shapley, unfairness, CoalitionTable, ExactValue, Norm};
use fedshare::model::{OrgId, Scenario, Time, SCHEMA_VERSION};
use fedshare::sim::{run_simulation_with, SimConfig};
use fedshare::workload::synth::{generate_swf, SynthConfig, PRESETS};
use fedshare::workload::{
    build_scenario, read_swf, sample_window, unitize, ScenarioParams, WorkloadSample, DAY,
};
use fedshare::PolicyKind;
use num_rational::Ratio;
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "fedshare",
    version,
    about = "Fair load balancing across federated clouds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one sampled window under one algorithm.
    Simulate(SimulateArgs),
    /// Score algorithms by fairness over many sampled windows.
    Tournament(TournamentArgs),
    /// Shapley values from a coalition table or a sampled window.
    Shapley(ShapleyArgs),
    /// Write a synthetic log in Standard Workload Format.
    GenLog(GenLogArgs),
}

#[derive(Args)]
struct WindowArgs {
    /// Workload log in Standard Workload Format.
    #[arg(long)]
    log: PathBuf,
    /// Scenario: 1, 2 or 3.
    #[arg(long, default_value = "1")]
    scenario: Scenario,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Window length in seconds.
    #[arg(long, default_value_t = DAY)]
    window: Time,
    #[arg(long, default_value_t = 5)]
    orgs: usize,
    /// Federation size: a core count, peak:FACTOR or util:TARGET.
    #[arg(long)]
    total_cores: Option<CoreRule>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    window: WindowArgs,
    #[arg(long)]
    algorithm: PolicyKind,
    /// Split jobs into single-core one-hour units before simulating.
    #[arg(long)]
    unitize: bool,
    /// Remove an organization mid-run, as ORG@TIME. Repeatable.
    #[arg(long = "depart", value_name = "ORG@TIME")]
    departures: Vec<String>,
    /// Also write an event trace next to the result.
    #[arg(long)]
    trace: bool,
    #[arg(long, default_value = "result.json")]
    out: PathBuf,
}

#[derive(Args)]
struct TournamentArgs {
    /// Experiment configuration (JSON); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    log: Vec<PathBuf>,
    /// Use every *.swf file in this directory.
    #[arg(long)]
    logs_dir: Option<PathBuf>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    window: Option<Time>,
    #[arg(long, value_delimiter = ',')]
    scenario: Vec<Scenario>,
    #[arg(long)]
    orgs: Option<usize>,
    #[arg(long)]
    total_cores: Option<CoreRule>,
    #[arg(long, alias = "algorithm", value_delimiter = ',')]
    algorithms: Vec<PolicyKind>,
    #[arg(long)]
    norm: Option<Norm>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ShapleyArgs {
    /// Coalition table (JSON).
    #[arg(long, conflicts_with = "log")]
    table: Option<PathBuf>,
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value = "1")]
    scenario: Scenario,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DAY)]
    window: Time,
    #[arg(long, default_value_t = 5)]
    orgs: usize,
    #[arg(long)]
    total_cores: Option<CoreRule>,
    #[arg(long, alias = "algorithm", value_delimiter = ',')]
    algorithms: Vec<PolicyKind>,
    #[arg(long, default_value = "l2")]
    norm: Norm,
    #[arg(long, default_value = "shapley.json")]
    out: PathBuf,
}

#[derive(Args)]
struct GenLogArgs {
    /// Starting profile: default, hpc, research, grid or mixed.
    #[arg(long, default_value = "default")]
    preset: String,
    #[arg(long)]
    days: Option<u32>,
    #[arg(long)]
    users: Option<u32>,
    #[arg(long)]
    sessions_per_day: Option<f64>,
    #[arg(long)]
    max_width: Option<u32>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Sample, unitize if asked, and build the scenario for one window.
fn prepare(
    args: &WindowArgs,
    unit: bool,
) -> Result<(
    fedshare::FederationSetup,
    Vec<fedshare::Job>,
    WorkloadSample,
)> {
    let log = read_swf(&args.log)?;
    let label = log_label(&args.log);
    let mut sample = sample_window(&log, args.window, derive_seed(args.seed, &label, 0, None))?;
    if unit {
        sample = unitize(&sample);
    }
    let total = args
        .total_cores
        .unwrap_or_default()
        .total_cores(&sample, args.orgs);
    let params = ScenarioParams::new(args.orgs, total);
    let seed = derive_seed(args.seed, &label, 0, Some(args.scenario));
    let (setup, jobs) = build_scenario(&sample, args.scenario, &params, seed)?;
    Ok((setup, jobs, sample))
}

fn parse_departure(s: &str) -> Result<(Time, OrgId)> {
    let Some((org, time)) = s.rsplit_once('@') else {
        bail!("departure '{s}' is not ORG@TIME");
    };
    let time = time
        .parse()
        .with_context(|| format!("bad departure time in '{s}'"))?;
    Ok((time, OrgId::from(org)))
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let (setup, jobs, _) = prepare(&args.window, args.unitize)?;
    let config = SimConfig {
        departures: args
            .departures
            .iter()
            .map(|d| parse_departure(d))
            .collect::<Result<_>>()?,
        trace: args.trace,
        ..SimConfig::default()
    };
    let seed = setup.seed;
    let outcome = run_simulation_with(&setup, &jobs, args.algorithm, seed, config)?;
    write_json(&args.out, &outcome.result)?;
    if args.trace {
        let path = args.out.with_extension("trace");
        let mut text = outcome.trace.join("\n");
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    }
    let waits: Vec<String> = outcome
        .result
        .wait_per_org
        .iter()
        .map(|(o, w)| format!("{o}={w}"))
        .collect();
    println!(
        "{} {} jobs={} total_wait={} {}",
        setup.scenario,
        args.algorithm,
        outcome.result.records.len(),
        outcome.result.total_wait(),
        waits.join(" ")
    );
    Ok(())
}

fn swf_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot read {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "swf"))
        .collect();
    files.sort();
    Ok(files)
}

fn tournament_cmd(args: TournamentArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(p) => {
            let text =
                fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("bad configuration {}", p.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if !args.log.is_empty() || args.logs_dir.is_some() {
        config.logs = args.log.clone();
        if let Some(dir) = &args.logs_dir {
            config.logs.extend(swf_files(dir)?);
        }
    }
    if let Some(v) = args.samples {
        config.samples = v;
    }
    if let Some(v) = args.window {
        config.window = v;
    }
    if !args.scenario.is_empty() {
        config.scenarios = args.scenario.clone();
    }
    if let Some(v) = args.orgs {
        config.n_orgs = v;
    }
    if let Some(v) = args.total_cores {
        config.total_cores = v;
    }
    if !args.algorithms.is_empty() {
        config.algorithms = args.algorithms.clone();
    }
    if let Some(v) = args.norm {
        config.norm = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if args.jobs.is_some() {
        config.jobs = args.jobs;
    }
    if args.out.is_some() {
        config.out = args.out.clone();
    }
    let out = config.out.clone().unwrap_or_else(|| PathBuf::from("out"));

    let outcome = run_experiment(&config)?;
    outcome.write(&out)?;
    let failures = outcome.failures().count();
    if failures > 0 {
        eprintln!(
            "{failures} of {} sample runs failed; see manifest.json",
            outcome.runs.len()
        );
    }
    let table = outcome.table();
    let header: Vec<String> = config
        .scenarios
        .iter()
        .map(|s| format!("{:>8}", s.to_string()))
        .collect();
    println!("{:<14}{}", "algorithm", header.join(""));
    for a in &config.algorithms {
        let cells: Vec<String> = config
            .scenarios
            .iter()
            .map(|s| format!("{:>8}", table[s][a]))
            .collect();
        println!("{:<14}{}", a.name(), cells.join(""));
    }
    Ok(())
}

#[derive(Serialize)]
struct TableReport {
    schema_version: u32,
    organizations: Vec<OrgId>,
    grand_value: Time,
    shapley: BTreeMap<OrgId, ExactValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grand_waits: Option<BTreeMap<OrgId, Time>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    unfairness: Option<f64>,
    norm: Norm,
}

fn print_efficiency(label: &str, phi: &BTreeMap<OrgId, ExactValue>, v_n: Time) {
    for (o, e) in phi {
        if e.denom == 1 {
            println!("{label}phi({o}) = {}", e.numer);
        } else {
            println!(
                "{label}phi({o}) = {}/{} ({:.4})",
                e.numer, e.denom, e.approx
            );
        }
    }
    let total: ExactValue = phi.values().map(|e| e.ratio()).sum::<Ratio<i128>>().into();
    let ok = total.denom == 1 && total.numer == i128::from(v_n);
    println!(
        "{label}efficiency: sum(phi) = {}, v(N) = {v_n} : {}",
        if total.denom == 1 {
            total.numer.to_string()
        } else {
            format!("{}/{}", total.numer, total.denom)
        },
        if ok { "ok" } else { "MISMATCH" }
    );
}

fn shapley_cmd(args: ShapleyArgs) -> Result<()> {
    if let Some(path) = &args.table {
        let text =
            fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let table: CoalitionTable = serde_json::from_str(&text)
            .with_context(|| format!("bad coalition table {}", path.display()))?;
        let phi = shapley(&table)?;
        let grand = table
            .grand()
            .expect("complete table has the grand coalition");
        let score = match &grand.waits {
            Some(w) => Some(unfairness(w, &phi, args.norm)?),
            None => None,
        };
        let report = TableReport {
            schema_version: SCHEMA_VERSION,
            organizations: table.organizations.clone(),
            grand_value: grand.value,
            shapley: phi.into_iter().map(|(o, r)| (o, r.into())).collect(),
            grand_waits: grand.waits.clone(),
            unfairness: score,
            norm: args.norm,
        };
        print_efficiency("", &report.shapley, grand.value);
        return write_json(&args.out, &report);
    }
    let Some(log) = args.log.clone() else {
        bail!("give --table or --log");
    };
    let window = WindowArgs {
        log,
        scenario: args.scenario,
        seed: args.seed,
        window: args.window,
        orgs: args.orgs,
        total_cores: args.total_cores,
    };
    let (setup, jobs, _) = prepare(&window, true)?;
    let algorithms = if args.algorithms.is_empty() {
        PolicyKind::ALL.to_vec()
    } else {
        args.algorithms.clone()
    };
    let report = evaluate_sample(&setup, &jobs, &algorithms, setup.seed, args.norm)?;
    for (k, a) in &report.algorithms {
        print_efficiency(&format!("{k}: "), &a.shapley, a.grand_value);
        println!("{k}: unfairness = {}", a.unfairness);
    }
    write_json(&args.out, &report)
}

fn gen_log(args: GenLogArgs) -> Result<()> {
    let Some(base) = SynthConfig::preset(&args.preset) else {
        bail!(
            "unknown preset '{}' (valid: default, {})",
            args.preset,
            PRESETS.join(", ")
        );
    };
    let config = SynthConfig {
        days: args.days.unwrap_or(base.days),
        users: args.users.unwrap_or(base.users),
        sessions_per_day: args.sessions_per_day.unwrap_or(base.sessions_per_day),
        max_width: args.max_width.unwrap_or(base.max_width),
        seed: args.seed,
        ..base
    };
    if config.days == 0
        || config.users == 0
        || config.max_width == 0
        || !config.sessions_per_day.is_finite()
        || config.sessions_per_day <= 0.0
    {
        bail!("days, users, sessions per day and max width must be positive");
    }
    fs::write(&args.out, generate_swf(&config))
        .with_context(|| format!("cannot write {}", args.out.display()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Tournament(a) => tournament_cmd(a),
        Command::Shapley(a) => shapley_cmd(a),
        Command::GenLog(a) => gen_log(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
