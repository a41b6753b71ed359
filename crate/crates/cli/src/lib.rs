//! `adjoint`: synthesize building data, train the adjoint forecaster,
//! score it and forecast the next horizon.
//!
//! Exit codes: 0 success, 1 divergence or other failure, 2 I/O error,
//! 3 invalid input, configuration or arguments, 4 comparison of
//! reports from different test splits, 5 not enough history for a forecast.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use adjoint_core::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::run;
pub use config::{ConfigError, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "adjoint", version, about = "Adjoint LSTM indoor-temperature forecaster")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Root seed; overrides the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Existing output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic building series as CSV.
    Synth(SynthArgs),
    /// Train on a CSV series and write a checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on the test split of a CSV series.
    Evaluate(EvaluateArgs),
    /// Forecast the steps after the last row of a CSV series.
    Forecast(ForecastArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub days: Option<usize>,
    /// First day, `YYYY-MM-DD`.
    #[arg(long)]
    pub start: Option<chrono::NaiveDate>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub holidays: Option<PathBuf>,
    #[arg(long)]
    pub federal_holidays: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub data: PathBuf,
    /// Epochs for every stage.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lookback: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Adjoint,
    MainOnly,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Second checkpoint to compare against.
    #[arg(long)]
    pub compare: Option<PathBuf>,
    /// Compare against the main network of the same checkpoint.
    #[arg(long, conflicts_with = "compare")]
    pub compare_main_only: bool,
    #[arg(long, value_enum, default_value = "adjoint")]
    pub variant: VariantArg,
    #[arg(long)]
    pub mc_samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Holidays falling inside the forecast horizon.
    #[arg(long)]
    pub holidays: Option<PathBuf>,
    #[arg(long)]
    pub mc_samples: Option<usize>,
}

/// The test splits behind two reports differ.
#[derive(Debug)]
pub struct SplitMismatch(pub String);

impl std::fmt::Display for SplitMismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "split mismatch: {}", self.0)
    }
}

impl std::error::Error for SplitMismatch {}

/// Process exit code for a failed command.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<SplitMismatch>() {
            return 4;
        }
        if cause.is::<ConfigError>() || cause.is::<toml::de::Error>() || cause.is::<serde_json::Error>() {
            return 3;
        }
        if cause.is::<std::io::Error>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Io { .. } => 2,
                Error::Validation(_) | Error::Format { .. } | Error::Serde(_) => 3,
                Error::Dimension { .. } | Error::Domain(_) | Error::Contract(_) => 3,
                Error::InsufficientHistory { .. } => 5,
                Error::Divergence { .. } => 1,
            };
        }
    }
    1
}
