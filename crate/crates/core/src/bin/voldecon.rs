// `!(x > y)` is deliberate: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use voldecon::grid::linspace;
use voldecon::metrics::{run_experiment, ExperimentScenario, ExperimentSpec, Metric};
use voldecon::pipeline::{resolve_scenario, run_pipeline, EstimatorConfig, PipelineConfig, PipelineOptions};
use voldecon::svsim::{simulate_scenario, DEFAULT_LOG_FLOOR};
use voldecon::{Error, Result};

/// Density of stochastic volatility by deconvolution.
///
/// Without a subcommand, runs the estimation pipeline on a price CSV or a
/// simulated scenario. Set VOLDECON_THREADS to limit worker threads.
#[derive(Parser)]
#[command(name = "voldecon", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write its prices.
    Simulate(SimulateArgs),
    /// Monte Carlo experiment over seeded replications.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Price CSV (header row; a single column or one named price/close).
    #[arg(long, conflicts_with = "scenario")]
    input: Option<PathBuf>,
    /// Scenario preset (ou-exp, regime-switch, nonlinear-ar) or scenario file.
    #[arg(long)]
    scenario: Option<String>,
    /// Observations simulated for a preset.
    #[arg(long)]
    n: Option<usize>,
    /// Seed of a preset (the price stream uses seed + 1).
    #[arg(long)]
    seed: Option<u64>,
    /// Subtract the mean log return.
    #[arg(long)]
    demean: bool,
    /// Sampling gap of the prices.
    #[arg(long)]
    delta: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Plain-text key-value config; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    estimator: EstimatorArgs,
}

#[derive(Args)]
struct EstimatorArgs {
    /// kernel, wavelet, ppe or regression.
    #[arg(long)]
    estimator: Option<String>,
    /// Fixed bandwidth h.
    #[arg(long, conflicts_with = "gamma")]
    bandwidth: Option<f64>,
    /// γ of the bandwidth rule: h = γπ/log n (kernel) or γ/log n (regression).
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    grid_points: Option<usize>,
    /// Wavelet level m, or `auto`.
    #[arg(long)]
    level: Option<String>,
    /// Wavelet truncation L, or `auto` (L = n).
    #[arg(long)]
    truncation: Option<String>,
    /// PPE penalty constant.
    #[arg(long)]
    kappa: Option<f64>,
    /// PPE coefficient truncation K_n (default n).
    #[arg(long)]
    kn: Option<usize>,
    /// Regression: mask points where |f_nh| falls below this.
    #[arg(long)]
    denominator_floor: Option<f64>,
    /// Regression: keep the E log Z² offset in the responses.
    #[arg(long)]
    raw_response: bool,
}

impl EstimatorArgs {
    fn options(&self) -> PipelineOptions {
        PipelineOptions {
            estimator: self.estimator.clone(),
            bandwidth: self.bandwidth,
            gamma: self.gamma,
            grid_points: self.grid_points,
            level: self.level.clone(),
            truncation: self.truncation.clone(),
            kappa: self.kappa,
            kn: self.kn,
            denominator_floor: self.denominator_floor,
            center_response: self.raw_response.then_some(false),
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Output directory for prices.csv, increments.csv and scenario.toml.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// ou-exp, regime-switch or pure-convolution.
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    replications: usize,
    #[arg(long, default_value_t = 1)]
    seed_base: u64,
    /// Comma-separated: mise, modes[:prominence], mse:<x>, moments.
    #[arg(long, default_value = "mise")]
    metrics: String,
    /// Evaluation grid as lo:hi:points.
    #[arg(long, default_value = "-6:6:241", allow_hyphen_values = true)]
    grid: String,
    /// Per-replication CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    estimator: EstimatorArgs,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            eprintln!("{}", serde_json::json!({ "error": "usage", "message": message.trim_end() }));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{body}");
            ExitCode::from(if matches!(e, Error::UnknownEstimator(_)) { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Some(Command::Simulate(args)) => simulate(args),
        Some(Command::Experiment(args)) => experiment(args),
        None => pipeline(cli.run),
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("VOLDECON_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("VOLDECON_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Error::Config(e.to_string()))
}

fn pipeline(args: RunArgs) -> Result<()> {
    let flags = PipelineOptions {
        input: args.input,
        scenario: args.scenario,
        n: args.n,
        seed: args.seed,
        demean: args.demean.then_some(true),
        delta: args.delta,
        out: args.out,
        ..args.estimator.options()
    };
    let opts = match &args.config {
        Some(path) => PipelineOptions::from_file(path)?.overlay(flags),
        None => flags,
    };
    let cfg = PipelineConfig::resolve(opts)?;
    let out = run_pipeline(&cfg)?;
    for f in &out.files {
        println!("{}", f.display());
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let cfg = resolve_scenario(&args.scenario, args.n, args.seed, args.delta)?;
    let (series, _) = simulate_scenario(&cfg)?;
    fs::create_dir_all(&args.out)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(args.out.join("prices.csv"))?));
    w.write_record(["t", "price"])?;
    for (i, s) in series.log_prices.iter().enumerate() {
        w.write_record([(i as f64 * series.delta).to_string(), s.exp().to_string()])?;
    }
    w.flush()?;
    series.write_increments_csv(BufWriter::new(File::create(args.out.join("increments.csv"))?), DEFAULT_LOG_FLOOR)?;
    fs::write(args.out.join("scenario.toml"), cfg.to_text())?;
    println!("{}", args.out.display());
    Ok(())
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let estimator = EstimatorConfig::from_options(&args.estimator.options())?.density_estimator()?;
    let spec = ExperimentSpec {
        scenario: ExperimentScenario::preset(&args.scenario, args.n)?,
        estimator,
        replications: args.replications,
        seed_base: args.seed_base,
        metrics: parse_metrics(&args.metrics)?,
        grid: parse_grid(&args.grid)?,
    };
    let report = run_experiment(&spec)?;
    if let Some(path) = &args.out {
        report.write_csv(BufWriter::new(File::create(path)?))?;
    }
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(report.summary_table().as_bytes())?;
    Ok(())
}

fn parse_metrics(text: &str) -> Result<Vec<Metric>> {
    let bad = |s: &str| Error::Config(format!("unknown metric `{s}`"));
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let (name, arg) = s.split_once(':').map_or((s, None), |(a, b)| (a, Some(b)));
            let num = |v: Option<&str>, default: Option<f64>| -> Result<f64> {
                match v {
                    Some(v) => v.parse().map_err(|_| bad(s)),
                    None => default.ok_or_else(|| bad(s)),
                }
            };
            match name {
                "mise" => Ok(Metric::Mise),
                "modes" => Ok(Metric::ModeCount(num(arg, Some(voldecon::pipeline::MODE_PROMINENCE))?)),
                "mse" => Ok(Metric::MsePoint(num(arg, None)?)),
                "moments" => Ok(Metric::MomentFit),
                _ => Err(bad(s)),
            }
        })
        .collect()
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Error::Config(format!("grid must be lo:hi:points, got `{text}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let points: usize = parts[2].parse().map_err(|_| bad())?;
    if !(hi > lo) || points < 3 {
        return Err(bad());
    }
    Ok(linspace(lo, hi, points))
}
