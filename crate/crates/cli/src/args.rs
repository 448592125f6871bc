use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mimest_core::estimators::{EstimatorKind, Mode};
use mimest_core::synth::{TaskFamily, TransformPair, DEFAULT_MC_SAMPLES};

#[derive(Debug, Parser)]
#[command(name = "mimest", version, about = "Mutual information estimation with copula-referenced classifiers")]
pub struct Cli {
    /// Master seed for data, training and sweeps.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for Monte Carlo and sweeps (0 = all cores).
    #[arg(long, global = true, env = "MIMEST_THREADS", default_value_t = 0)]
    pub threads: usize,

    /// Output file; defaults depend on the subcommand.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    /// File format (csv, json, bin) or, for oracle and estimate, `json`
    /// for machine-readable console output.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Bin,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a synthetic dataset.
    Generate {
        #[command(flatten)]
        task: TaskArgs,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
    },
    /// Print the ground-truth MI of a task.
    Oracle {
        #[command(flatten)]
        task: TaskArgs,
        /// Monte Carlo draws for mixture tasks.
        #[arg(long, default_value_t = DEFAULT_MC_SAMPLES)]
        mc_samples: usize,
    },
    /// Fit a Gaussian copula to a dataset and save it as JSON.
    FitCopula {
        #[arg(long)]
        input: PathBuf,
    },
    /// Run one estimator on a dataset file or an inline task.
    Estimate {
        /// Dataset file; without it the task flags generate one.
        #[arg(long, conflicts_with_all = ["task", "d", "rho", "transform"])]
        input: Option<PathBuf>,
        #[command(flatten)]
        task: TaskArgs,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, value_parser = parse_estimator)]
        estimator: EstimatorKind,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<Mode>,
        /// JSON file of estimator settings.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Start from the single-core preset instead of the defaults.
        #[arg(long)]
        desk: bool,
        /// Hidden layer width.
        #[arg(long)]
        width: Option<usize>,
        /// Append the result as a record to this CSV file (inline tasks only).
        #[arg(long, conflicts_with = "input")]
        record: Option<PathBuf>,
    },
    /// Run a sweep described by a JSON config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Keep successful rows already in the output file.
        #[arg(long)]
        resume: bool,
    },
    /// Aggregate sweep records per cell and estimator.
    Summarize {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct TaskArgs {
    #[arg(long, value_parser = parse_task)]
    pub task: Option<TaskFamily>,
    /// Dimension of each of x and y.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub d: Option<u64>,
    /// Correlation of the latent coordinate pairs.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_rho)]
    pub rho: Option<f64>,
    /// Element-wise transform, or `fx-gy` for different sides.
    #[arg(long, value_parser = parse_transform)]
    pub transform: Option<TransformPair>,
}

fn parse_estimator(s: &str) -> Result<EstimatorKind, String> {
    s.parse().map_err(|e: mimest_core::Error| e.to_string())
}

fn parse_task(s: &str) -> Result<TaskFamily, String> {
    s.parse().map_err(|e: mimest_core::Error| e.to_string())
}

fn parse_transform(s: &str) -> Result<TransformPair, String> {
    s.parse().map_err(|e: mimest_core::Error| e.to_string())
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "ratio" => Ok(Mode::Ratio),
        "dv" => Ok(Mode::Dv),
        _ => Err(format!("unknown mode {s:?} (ratio, dv)")),
    }
}

fn parse_rho(s: &str) -> Result<f64, String> {
    let rho: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if rho > -1.0 && rho < 1.0 {
        Ok(rho)
    } else {
        Err(format!("rho must satisfy -1 < rho < 1, got {rho}"))
    }
}
