//! `clvae`: ingestion, model fitting, prediction and benchmarking from the
//! command line. Settings come from a TOML file (`--config`) and are
//! overridden by flags; `CLVAE_OUTPUT_DIR` and `CLVAE_THREADS` override the
//! output directory and thread count.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use clvae::eval::ModelKind;
use clvae::{Error, Result};

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "clvae", version, about = "Customer lifetime value with a Pareto/NBD variational autoencoder")]
struct Cli {
    /// TOML configuration file, or the JSON echo of an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for relative output paths.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Worker threads for simulation and benchmarking.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Transaction log -> RFM summaries (and optionally holdout revenue).
    Ingest(IngestArgs),
    /// Summaries -> Pareto/NBD + Gamma-Gamma parameter document.
    FitBaseline(FitBaselineArgs),
    /// Summaries -> CLVAE checkpoint and training log.
    FitClvae(FitClvaeArgs),
    /// Summaries + checkpoint or baseline -> per-customer forecasts.
    Predict(PredictArgs),
    /// Transaction log -> calibration/holdout benchmark report.
    Evaluate(EvaluateArgs),
    /// Synthetic transaction log and latent truth.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long)]
    transactions: Option<PathBuf>,
    /// Last calibration day (YYYY-MM-DD).
    #[arg(long)]
    calibration_end: Option<NaiveDate>,
    /// Date up to which the log is complete (YYYY-MM-DD).
    #[arg(long)]
    observed_until: Option<NaiveDate>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    holdout_out: Option<PathBuf>,
    /// Holdout horizons in weeks, comma separated.
    #[arg(long, value_delimiter = ',')]
    horizons: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct FitBaselineArgs {
    #[arg(long)]
    summaries: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitClvaeArgs {
    #[arg(long)]
    summaries: Option<PathBuf>,
    /// Parameter document for the priors.
    #[arg(long)]
    baseline: Option<PathBuf>,
    /// Checkpoint directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    mc_samples: Option<usize>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    summaries: Option<PathBuf>,
    #[arg(long, conflicts_with = "baseline")]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    baseline: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report_out: Option<PathBuf>,
    #[arg(long)]
    draws_out: Option<PathBuf>,
    /// Draws per customer.
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    horizons: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    transactions: Option<PathBuf>,
    #[arg(long)]
    calibration_end: Option<NaiveDate>,
    #[arg(long)]
    observed_until: Option<NaiveDate>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv_out: Option<PathBuf>,
    /// Models to run, comma separated (pnbd_gg, pnbd_gg_per_cohort, clvae, clvae_covariates).
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<ModelKind>>,
    #[arg(long, value_delimiter = ',')]
    horizons: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    customers: Option<usize>,
    #[arg(long)]
    window_weeks: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    log_out: Option<PathBuf>,
    #[arg(long)]
    truth_out: Option<PathBuf>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

/// File, then environment, then flags.
fn resolve(cli: Cli) -> Result<(&'static str, RunConfig)> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.command = None;
    if let Ok(dir) = std::env::var("CLVAE_OUTPUT_DIR") {
        cfg.output_dir = Some(dir.into());
    }
    if let Ok(n) = std::env::var("CLVAE_THREADS") {
        cfg.threads = Some(n.parse().map_err(|_| Error::Config(format!("CLVAE_THREADS={n:?} is not a count")))?);
    }
    set_opt(&mut cfg.output_dir, cli.output_dir);
    set_opt(&mut cfg.threads, cli.threads);

    let name = match cli.command {
        Command::Ingest(a) => {
            let s = &mut cfg.ingest;
            set_opt(&mut s.transactions, a.transactions);
            set_opt(&mut s.calibration_end, a.calibration_end);
            set_opt(&mut s.observed_until, a.observed_until);
            set(&mut s.summaries_out, a.out);
            set_opt(&mut s.holdout_out, a.holdout_out);
            set(&mut s.horizons, a.horizons);
            "ingest"
        }
        Command::FitBaseline(a) => {
            let s = &mut cfg.fit_baseline;
            set_opt(&mut s.summaries, a.summaries);
            set(&mut s.out, a.out);
            "fit-baseline"
        }
        Command::FitClvae(a) => {
            let s = &mut cfg.fit_clvae;
            set_opt(&mut s.summaries, a.summaries);
            set_opt(&mut s.baseline, a.baseline);
            set(&mut s.out, a.out);
            set(&mut s.train.seed, a.seed);
            set(&mut s.train.max_epochs, a.max_epochs);
            set(&mut s.train.patience, a.patience);
            set(&mut s.train.learning_rate, a.learning_rate);
            set(&mut s.train.batch_size, a.batch_size);
            set(&mut s.train.mc_samples, a.mc_samples);
            "fit-clvae"
        }
        Command::Predict(a) => {
            let s = &mut cfg.predict;
            set_opt(&mut s.summaries, a.summaries);
            if a.checkpoint.is_some() {
                s.baseline = None;
            }
            if a.baseline.is_some() {
                s.checkpoint = None;
            }
            set_opt(&mut s.checkpoint, a.checkpoint);
            set_opt(&mut s.baseline, a.baseline);
            set(&mut s.out, a.out);
            set_opt(&mut s.report_out, a.report_out);
            set_opt(&mut s.draws_out, a.draws_out);
            set(&mut s.sim.draws, a.draws);
            set(&mut s.sim.seed, a.seed);
            set(&mut s.sim.horizons, a.horizons);
            "predict"
        }
        Command::Evaluate(a) => {
            let s = &mut cfg.evaluate;
            set_opt(&mut s.transactions, a.transactions);
            set_opt(&mut s.calibration_end, a.calibration_end);
            set_opt(&mut s.observed_until, a.observed_until);
            set(&mut s.out, a.out);
            set_opt(&mut s.csv_out, a.csv_out);
            set(&mut s.benchmark.models, a.models);
            set(&mut s.benchmark.sim.horizons, a.horizons);
            if let Some(seed) = a.seed {
                s.benchmark.train.seed = seed;
                s.benchmark.sim.seed = seed;
            }
            "evaluate"
        }
        Command::Simulate(a) => {
            let s = &mut cfg.simulate;
            set(&mut s.spec.customers, a.customers);
            set(&mut s.spec.window_weeks, a.window_weeks);
            set(&mut s.spec.seed, a.seed);
            set(&mut s.log_out, a.log_out);
            set(&mut s.truth_out, a.truth_out);
            "simulate"
        }
    };
    Ok((name, cfg))
}

fn run(cli: Cli) -> Result<()> {
    let (name, cfg) = resolve(cli)?;
    if let Some(n) = cfg.threads {
        if n == 0 {
            return Err(Error::Config("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match name {
        "ingest" => commands::ingest(&cfg),
        "fit-baseline" => commands::fit_baseline(&cfg),
        "fit-clvae" => commands::fit_clvae(&cfg),
        "predict" => commands::predict(&cfg),
        "evaluate" => commands::evaluate(&cfg),
        _ => commands::simulate(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {message}", e.category());
            ExitCode::from(1)
        }
    }
}
