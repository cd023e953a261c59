//! `hetgp`: sample synthetic simulators, train homoscedastic and
//! heteroscedastic GP surrogates, predict, and score predictive distributions.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod longcsv;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "hetgp", version, about, propagate_version = true)]
struct Cli {
    /// Print errors to stderr as a JSON object.
    #[arg(long, global = true)]
    json_errors: bool,

    /// JSON settings file; command-line flags take precedence over it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Increase log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a training data set, or a replication reference at fixed inputs.
    Sample(SampleFlags),
    /// Fit a GPR or H-GPR model to a CSV data set.
    Train(TrainFlags),
    /// Predictive moments and samples at query points.
    Predict(PredictFlags),
    /// Score prediction files against a replication reference.
    Evaluate(EvaluateFlags),
    /// Run the GPR versus H-GPR comparison protocol on built-in scenarios.
    Bench(BenchFlags),
}

#[derive(Debug, Args, Serialize)]
pub struct SampleFlags {
    /// Built-in scenario id or path to a scenario JSON file.
    #[arg(long)]
    scenario: Option<String>,
    /// Number of training rows.
    #[arg(long)]
    n: Option<usize>,
    /// `sobol` or `random`.
    #[arg(long)]
    design: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Draw this many replications per slice condition instead of a data set.
    #[arg(long)]
    replications: Option<usize>,
    /// Conditions for replications, e.g. `u=6..22 step 4; default-case`.
    #[arg(long)]
    at_slice: Option<String>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainFlags {
    /// `gpr` or `hgpr`.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Target column name.
    #[arg(long)]
    target: Option<String>,
    /// Use the first N rows of the data file.
    #[arg(long)]
    n_train: Option<usize>,
    /// Inducing points per latent (H-GPR).
    #[arg(long)]
    inducing: Option<usize>,
    /// Model the logarithm of a positive target. Defaults to the data
    /// sidecar's scenario flag, else false.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    log_target: Option<bool>,
    /// Z-score outlier threshold on the raw target.
    #[arg(long)]
    zscore: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Optimizer restarts (GPR).
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Minibatch size (H-GPR); full batch when omitted.
    #[arg(long)]
    minibatch: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Optimize inducing inputs (H-GPR).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    learn_z: Option<bool>,
    /// `log-variance` or `log-std` (H-GPR noise link).
    #[arg(long)]
    noise_param: Option<String>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Training report path; defaults to the model path with `.report.json`.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictFlags {
    #[arg(long)]
    model: Option<PathBuf>,
    /// Query slice, e.g. `x=0.1..0.9 step 0.2`.
    #[arg(long)]
    at_slice: Option<String>,
    /// CSV of query points with the model's feature columns.
    #[arg(long)]
    query: Option<PathBuf>,
    /// Predictive draws per query (default 0 for GPR, 5000 for H-GPR).
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateFlags {
    /// Replication reference written by `sample --replications`.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Prediction file, optionally named: `hgpr=p.csv`. Repeatable.
    #[arg(long = "predictions", value_name = "[NAME=]FILE")]
    predictions: Option<Vec<String>>,
    /// JSON report path.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// CSV report path; defaults to the JSON path with `.csv`.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchFlags {
    /// Scenario ids (repeatable); defaults to S1 and S6.
    #[arg(long = "scenario")]
    scenarios: Option<Vec<String>>,
    /// Smaller training sets and budgets for a fast smoke run.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    quick: Option<bool>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("HETGP_THREADS") else {
        return Ok(());
    };
    let n: usize = match v.trim().parse() {
        Ok(n) if n > 0 => n,
        _ => return error::invalid(format!("HETGP_THREADS must be a positive integer, got `{v}`")),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn run(cli: Cli) -> CliResult<()> {
    init_threads()?;
    let cfg = cli.config.as_deref();
    match &cli.command {
        Command::Sample(f) => commands::sample::run(cfg, f),
        Command::Train(f) => commands::train::run(cfg, f),
        Command::Predict(f) => commands::predict::run(cfg, f),
        Command::Evaluate(f) => commands::evaluate::run(cfg, f),
        Command::Bench(f) => commands::bench::run(cfg, f),
    }
}

fn report(json: bool, kind: &str, message: &str) {
    if json {
        let doc = serde_json::json!({ "error": { "kind": kind, "message": message } });
        eprintln!("{doc}");
    } else {
        eprintln!("error: {message}");
    }
}

fn main() -> ExitCode {
    // Needed before parsing succeeds, so read straight from argv.
    let json = std::env::args().any(|a| a == "--json-errors");
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            if json {
                report(true, "usage", e.to_string().trim());
            } else {
                let _ = e.print();
            }
            return ExitCode::from(2);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let json = cli.json_errors;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(json, e.kind(), e.message());
            e.exit_code()
        }
    }
}
