//! `relucert` command-line front end.
//!
//! Exit codes: `verify` maps proved/region_empty to 0, violated to 1 and
//! unknown to 2; `validate-data` exits 1 when any record is flagged. Runtime
//! errors exit 3, usage errors exit 4. The resolved configuration is echoed
//! as one JSON line on stderr; stdout carries a single JSON document.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use relucert::data::parse_patterns;
use relucert::milp::check_claim_detailed;
use relucert::scenario::{
    self, generate_scenarios, inject_violations, left_cut_in_pattern, no_left_cut_in_claim,
    Architecture, ScenarioParams, TrainConfig, CLAIM_THRESHOLD,
};
use relucert::{
    enumerate_phases, load_network, maximize, parse_claim, profile, propagate_box, sanitize,
    validate_dataset, Dataset, InputRegion, MaximizeOptions, Network, SearchMode, UnsafePattern,
    VerdictStatus,
};
use serde::Serialize;
use serde_json::json;

const EXIT_ERROR: u8 = 3;
const EXIT_USAGE: u8 = 4;
const THREADS_VAR: &str = "RELUCERT_THREADS";

#[derive(Parser, Serialize)]
#[command(name = "relucert", version, about = "Safety verification for ReLU networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum Command {
    /// Decide a safety claim; exit 0 proved, 1 violated, 2 unknown.
    Verify(VerifyArgs),
    /// Bound objective·f(x) over an input region.
    Maximize(MaximizeArgs),
    /// Exact maximum by enumerating crossing-neuron phases (small networks only).
    Oracle(OracleArgs),
    /// Report records matching unsafe patterns; exit 1 if any match.
    ValidateData(DataArgs),
    /// Drop records matching unsafe patterns.
    Sanitize(SanitizeArgs),
    /// Neuron activation frequencies and feature correlations.
    Profile(ProfileArgs),
    /// Generate synthetic highway scenarios.
    Gen(GenArgs),
    /// Train a ReLU regressor on a dataset.
    Train(TrainArgs),
    /// Sanitize, train several networks and verify a claim on each.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Deterministic,
    Parallel,
}

#[derive(Args, Serialize)]
struct SolverArgs {
    /// Wall-clock limit in seconds.
    #[arg(long, default_value_t = 600.0, value_parser = positive)]
    timeout: f64,
    #[arg(long, value_enum, default_value_t = Mode::Deterministic)]
    mode: Mode,
    /// Absolute optimality gap.
    #[arg(long, default_value_t = 1e-6, value_parser = non_negative)]
    gap: f64,
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    #[arg(long, value_parser = existing)]
    network: PathBuf,
    #[arg(long, value_parser = existing)]
    claim: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    /// Also write the verdict here.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write interval bounds of the claim box as JSON.
    #[arg(long)]
    dump_bounds: Option<PathBuf>,
    /// Write the root LP relaxation as text.
    #[arg(long)]
    dump_lp: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct MaximizeArgs {
    #[arg(long, value_parser = existing)]
    network: PathBuf,
    #[arg(long, value_parser = existing)]
    region: PathBuf,
    /// Comma-separated output weights.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    objective: Vec<f64>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Serialize)]
struct OracleArgs {
    #[arg(long, value_parser = existing)]
    network: PathBuf,
    #[arg(long, value_parser = existing)]
    region: PathBuf,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    objective: Vec<f64>,
}

#[derive(Args, Serialize)]
struct DataArgs {
    #[arg(long, value_parser = existing)]
    data: PathBuf,
    #[arg(long, value_parser = existing)]
    patterns: PathBuf,
}

#[derive(Args, Serialize)]
struct SanitizeArgs {
    #[command(flatten)]
    input: DataArgs,
    /// Where to write the cleaned CSV.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Serialize)]
struct ProfileArgs {
    #[arg(long, value_parser = existing)]
    network: PathBuf,
    #[arg(long, value_parser = existing)]
    data: PathBuf,
    #[arg(long, default_value_t = relucert::trace::DEFAULT_TOP_K)]
    top_k: usize,
    /// Print a table instead of JSON.
    #[arg(long)]
    pretty: bool,
}

#[derive(Args, Serialize)]
struct GenArgs {
    #[arg(long, default_value_t = 20_000)]
    n_records: usize,
    #[arg(long, default_value_t = 2018)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
    /// Overwrite this many records with unsafe left cut-ins.
    #[arg(long, default_value_t = 0)]
    inject_violations: usize,
    /// Seed for the injection; defaults to `seed + 1`.
    #[arg(long)]
    inject_seed: Option<u64>,
}

#[derive(Args, Serialize)]
struct TrainingArgs {
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 0.01, value_parser = positive)]
    lr: f64,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    #[arg(long, value_parser = existing)]
    data: PathBuf,
    /// Hidden layers as `LAYERSxWIDTH` or `W1-W2-...`.
    #[arg(long)]
    arch: Architecture,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    training: TrainingArgs,
    /// Where to write the network JSON.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Serialize)]
struct BenchArgs {
    #[arg(long, value_parser = existing)]
    data: PathBuf,
    /// Comma-separated architectures.
    #[arg(long, value_delimiter = ',', default_value = "2x10,2x16")]
    arch: Vec<Architecture>,
    /// Comma-separated training seeds, one per architecture; defaults to 1, 2, ...
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Claim file; defaults to the built-in no-left-cut-in claim.
    #[arg(long, value_parser = existing)]
    claim: Option<PathBuf>,
    /// Threshold for the built-in claim.
    #[arg(long, default_value_t = CLAIM_THRESHOLD)]
    threshold: f64,
    /// Pattern file; defaults to the built-in left cut-in pattern.
    #[arg(long, value_parser = existing)]
    patterns: Option<PathBuf>,
    #[command(flatten)]
    training: TrainingArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Also write the report JSON here.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write a human-readable table here.
    #[arg(long)]
    table: Option<PathBuf>,
}

fn existing(s: &str) -> Result<PathBuf, String> {
    let p = PathBuf::from(s);
    if p.is_file() {
        Ok(p)
    } else {
        Err(format!("no such file: {s}"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got {s}")),
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a non-negative number, got {s}")),
    }
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<relucert::Error> for Failure {
    fn from(e: relucert::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = Result<u8, Failure>;

fn threads() -> Result<usize, Failure> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Failure::Usage(format!("{THREADS_VAR} must be a positive integer, got {v:?}"))),
        },
    }
}

fn options(s: &SolverArgs, workers: usize) -> MaximizeOptions {
    let mode = match s.mode {
        Mode::Deterministic => SearchMode::Deterministic,
        Mode::Parallel => SearchMode::Parallel { workers },
    };
    let mut o = MaximizeOptions::default().with_timeout_s(s.timeout).with_mode(mode);
    o.gap = s.gap;
    o
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn read_network(path: &Path) -> Result<Network, Failure> {
    Ok(load_network(&read(path)?)?)
}

fn read_dataset(path: &Path) -> Result<Dataset, Failure> {
    let f = fs::File::open(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    Ok(Dataset::read_csv(f)?)
}

fn read_patterns(path: &Path) -> Result<Vec<UnsafePattern>, Failure> {
    Ok(parse_patterns(&read(path)?)?)
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

/// Writes to stdout; a closed pipe is not an error.
fn out(text: &str) {
    let mut stdout = io::stdout().lock();
    let _ = stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush());
}

fn emit<T: Serialize>(doc: &T) {
    out(&format!(
        "{}\n",
        serde_json::to_string_pretty(doc).expect("output documents always serialize")
    ));
}

fn verify(a: &VerifyArgs, workers: usize) -> Outcome {
    let net = read_network(&a.network)?;
    let claim = parse_claim(&read(&a.claim)?)?;
    claim.validate_for(&net)?;
    if let Some(p) = &a.dump_bounds {
        let bounds = propagate_box(&net, &claim.region.input_box)?;
        write(p, &serde_json::to_string_pretty(&bounds).expect("bounds serialize"))?;
    }
    if let Some(p) = &a.dump_lp {
        let bounds = propagate_box(&net, &claim.region.input_box)?;
        let sys = relucert::encode(&net, &claim.region, &bounds)?;
        write(p, &sys.relaxation(&claim.objective)?.to_string())?;
    }
    let (verdict, _) = check_claim_detailed(&net, &claim, &options(&a.solver, workers))?;
    let text = verdict.to_json();
    if let Some(p) = &a.output {
        write(p, &text)?;
    }
    out(&format!("{text}\n"));
    Ok(match verdict.status {
        VerdictStatus::Proved | VerdictStatus::RegionEmpty => 0,
        VerdictStatus::Violated => 1,
        VerdictStatus::Unknown => 2,
    })
}

fn run_maximize(a: &MaximizeArgs, workers: usize) -> Outcome {
    let net = read_network(&a.network)?;
    let region = InputRegion::parse(&read(&a.region)?)?;
    let res = maximize(&net, &region, &a.objective, &options(&a.solver, workers))?;
    emit(&res);
    Ok(0)
}

fn oracle(a: &OracleArgs) -> Outcome {
    let net = read_network(&a.network)?;
    let region = InputRegion::parse(&read(&a.region)?)?;
    let max = enumerate_phases(&net, &region, &a.objective)?;
    emit(&json!({ "maximum": max.is_finite().then_some(max), "region_empty": max == f64::NEG_INFINITY }));
    Ok(0)
}

fn validate(a: &DataArgs) -> Outcome {
    let ds = read_dataset(&a.data)?;
    let report = validate_dataset(&ds, &read_patterns(&a.patterns)?)?;
    emit(&report);
    Ok(u8::from(!report.is_clean()))
}

fn run_sanitize(a: &SanitizeArgs) -> Outcome {
    let ds = read_dataset(&a.input.data)?;
    let patterns = read_patterns(&a.input.patterns)?;
    let removed = validate_dataset(&ds, &patterns)?.flagged();
    let clean = sanitize(&ds, &patterns)?;
    write(&a.output, &clean.to_csv_string())?;
    emit(&json!({
        "records_in": ds.len(),
        "records_out": clean.len(),
        "removed": removed,
        "output": a.output,
    }));
    Ok(0)
}

fn run_profile(a: &ProfileArgs) -> Outcome {
    let net = read_network(&a.network)?;
    let ds = read_dataset(&a.data)?;
    let profiles = profile(&net, &ds, a.top_k)?;
    if a.pretty {
        out(&relucert::trace::render_table(&profiles));
    } else {
        emit(&profiles);
    }
    Ok(0)
}

fn gen(a: &GenArgs) -> Outcome {
    let ds = generate_scenarios(&ScenarioParams {
        n_records: a.n_records,
        seed: a.seed,
    })?;
    let (ds, injected) = if a.inject_violations > 0 {
        inject_violations(&ds, a.inject_violations, a.inject_seed.unwrap_or(a.seed.wrapping_add(1)))?
    } else {
        (ds, Vec::new())
    };
    write(&a.output, &ds.to_csv_string())?;
    emit(&json!({ "records": ds.len(), "injected": injected, "output": a.output }));
    Ok(0)
}

fn train_config(arch: Architecture, seed: u64, t: &TrainingArgs) -> TrainConfig {
    let mut cfg = TrainConfig::new(arch, seed);
    cfg.epochs = t.epochs;
    cfg.batch_size = t.batch;
    cfg.learning_rate = t.lr;
    cfg
}

fn run_train(a: &TrainArgs) -> Outcome {
    let ds = read_dataset(&a.data)?;
    let cfg = train_config(a.arch.clone(), a.seed, &a.training);
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let model = scenario::train(&ds, &cfg)?;
    write(&a.output, &model.network.to_json())?;
    emit(&json!({
        "network": cfg.network_name(),
        "architecture": model.network.architecture_tag(),
        "final_mse": model.final_mse,
        "epoch_losses": model.epoch_losses,
        "output": a.output,
    }));
    Ok(0)
}

fn run_bench(a: &BenchArgs, workers: usize) -> Outcome {
    if !a.seeds.is_empty() && a.seeds.len() != a.arch.len() {
        return Err(Failure::Usage(format!(
            "--seeds has {} entries but --arch has {}",
            a.seeds.len(),
            a.arch.len()
        )));
    }
    let configs: Vec<TrainConfig> = a
        .arch
        .iter()
        .enumerate()
        .map(|(i, arch)| {
            let seed = a.seeds.get(i).copied().unwrap_or(i as u64 + 1);
            train_config(arch.clone(), seed, &a.training)
        })
        .collect();
    for cfg in &configs {
        cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let ds = read_dataset(&a.data)?;
    let claim = match &a.claim {
        Some(p) => parse_claim(&read(p)?)?,
        None => no_left_cut_in_claim(a.threshold),
    };
    let patterns = match &a.patterns {
        Some(p) => read_patterns(p)?,
        None => vec![left_cut_in_pattern()],
    };
    let run = scenario::bench(&ds, &patterns, &configs, &claim, &options(&a.solver, workers))?;
    let text = run.report.to_json();
    if let Some(p) = &a.output {
        write(p, &text)?;
    }
    if let Some(p) = &a.table {
        write(p, &run.report.render_table())?;
    }
    out(&format!("{text}\n"));
    Ok(0)
}

fn run(cli: &Cli) -> Outcome {
    let workers = threads()?;
    eprintln!(
        "{}",
        json!({ "config": cli.command, THREADS_VAR: workers })
    );
    match &cli.command {
        Command::Verify(a) => verify(a, workers),
        Command::Maximize(a) => run_maximize(a, workers),
        Command::Oracle(a) => oracle(a),
        Command::ValidateData(a) => validate(a),
        Command::Sanitize(a) => run_sanitize(a),
        Command::Profile(a) => run_profile(a),
        Command::Gen(a) => gen(a),
        Command::Train(a) => run_train(a),
        Command::Bench(a) => run_bench(a, workers),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
