//! `gp-relevance`: fit GP models, rank input variables and run the
//! forward-selection benchmark from the command line.
//!
//! Exit codes: 0 success, 2 bad flags, 3 data errors, 4 optimization or
//! method errors, 5 when no benchmark method completed.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gp_relevance::experiments::InputDist;
use gp_relevance::relevance::{DEFAULT_DELTA, DEFAULT_QUAD_ORDER};
use gp_relevance::{Error, HyperPriors, Method};

#[derive(Debug, Parser)]
#[command(name = "gp-relevance", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Standardize a CSV dataset and fit a GP by maximizing the hyperparameter posterior.
    Fit(FitArgs),
    /// Compute variable relevances for a fitted model.
    Rank(RankArgs),
    /// Generate the additive sinusoid toy dataset.
    Toygen(ToygenArgs),
    /// Forward-selection benchmark with ranking entropies over random splits.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
enum PriorMode {
    /// Half-t on magnitudes, inverse-gamma on length-scales.
    Map,
    /// No priors: maximum marginal likelihood.
    Ml,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
struct PriorArgs {
    #[arg(long, value_enum, default_value = "map")]
    priors: PriorMode,
    #[arg(long, default_value_t = 4.0)]
    half_t_df: f64,
    #[arg(long, default_value_t = 1.0)]
    half_t_scale: f64,
    #[arg(long, default_value_t = 2.0)]
    invgamma_shape: f64,
    #[arg(long, default_value_t = 1.0)]
    invgamma_scale: f64,
}

impl PriorArgs {
    fn resolve(&self) -> Result<Option<HyperPriors>, Failure> {
        if self.priors == PriorMode::Ml {
            return Ok(None);
        }
        let p = HyperPriors {
            half_t_df: self.half_t_df,
            half_t_scale: self.half_t_scale,
            invgamma_shape: self.invgamma_shape,
            invgamma_scale: self.invgamma_scale,
        };
        p.validate().map_err(|e| Failure::usage(e.to_string()))?;
        Ok(Some(p))
    }
}

#[derive(Debug, Args, serde::Serialize)]
struct FitArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Name of the target column.
    #[arg(long)]
    target: String,
    #[command(flatten)]
    priors: PriorArgs,
    /// Optimizer restarts.
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model JSON to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, serde::Serialize)]
struct RankArgs {
    /// Model JSON written by `fit`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    method: Method,
    /// Perturbation size for the KL method.
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    /// Gauss-Hermite order for the VAR method.
    #[arg(long, default_value_t = DEFAULT_QUAD_ORDER)]
    quad_order: usize,
    /// Also write the per-point relevances to this CSV.
    #[arg(long)]
    pointwise: Option<PathBuf>,
    /// Report file; `.json` selects JSON, anything else CSV. Defaults to CSV on stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, serde::Serialize)]
struct ToygenArgs {
    #[arg(long, default_value_t = 300)]
    n: usize,
    #[arg(long, default_value = "uniform")]
    dist: InputDist,
    /// Extra standard-normal columns unrelated to the target.
    #[arg(long, default_value_t = 0)]
    irrelevant: usize,
    #[arg(long, default_value_t = 0.3)]
    noise_sd: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, serde::Serialize)]
struct BenchmarkArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    target: String,
    #[arg(long, value_delimiter = ',', default_value = "ard,kl,var")]
    methods: Vec<Method>,
    /// Training rows per split; the remaining rows form the test set.
    #[arg(long)]
    n_train: usize,
    #[arg(long, default_value_t = 20)]
    resamples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    /// Submodel sizes to evaluate (default: 1..=p).
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[command(flatten)]
    priors: PriorArgs,
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    #[arg(long, default_value_t = DEFAULT_QUAD_ORDER)]
    quad_order: usize,
}

/// A message for standard error together with the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }

    pub fn method(message: impl Into<String>) -> Self {
        Self {
            code: 4,
            message: message.into(),
        }
    }

    /// Classifies a library error raised while loading or validating input.
    pub fn from_input(e: Error) -> Self {
        match e {
            Error::InvalidArgument(m) => Self::usage(m),
            other => Self::data(other.to_string()),
        }
    }

    /// Classifies a library error raised while fitting or ranking.
    pub fn from_compute(e: Error) -> Self {
        match e {
            Error::InvalidArgument(m) => Self::usage(m),
            e @ (Error::Data(_) | Error::Io(_) | Error::DegenerateInputs(_)) => {
                Self::data(e.to_string())
            }
            other => Self::method(other.to_string()),
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("GP_RELEVANCE_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::usage(format!(
            "GP_RELEVANCE_THREADS must be a positive integer, got {v:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::usage(e.to_string()))
}

fn main() -> ExitCode {
    // The Δ range warning is issued once by the commands themselves rather
    // than per relevance call inside the library.
    env_logger::Builder::from_env(
        env_logger::Env::default().default_filter_or("warn,gp_relevance::relevance=error"),
    )
    .format_timestamp(None)
    .init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Rank(a) => commands::rank(a),
        Command::Toygen(a) => commands::toygen(a),
        Command::Benchmark(a) => commands::benchmark(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
