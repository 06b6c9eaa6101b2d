//! `capnet`: sum-rate capacity analysis for interference networks.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug)]
pub enum CliError {
    /// Malformed input or parameters.
    Config(String),
    /// A search or sweep would exceed its cap.
    Cap(String),
    Internal(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(s) => write!(f, "config error: {}", s),
            CliError::Cap(s) => write!(f, "{}", s),
            CliError::Internal(s) => write!(f, "internal error: {}", s),
        }
    }
}

impl From<capnet::Error> for CliError {
    fn from(e: capnet::Error) -> Self {
        use capnet::Error::*;
        match e {
            CapExceeded { .. } => CliError::Cap(e.to_string()),
            Dimension(_)
            | UnknownMessage(_)
            | InvalidChannel(_)
            | InvalidTopology(_)
            | InvalidPermutation(_)
            | BadParams(_)
            | UnknownTheorem(_)
            | UnknownScheme(_)
            | Shape(_)
            | NegativeInput(_) => CliError::Config(e.to_string()),
            UnknownVariable(_) | Overlap(_) | SingularCovariance(_) | EmptyArgmax => {
                CliError::Internal(e.to_string())
            }
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Cap(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "capnet",
    version,
    about = "Sum-rate capacity analysis for interference networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Check topology invariants and report connectivity.
    Validate,
    /// Run the message reduction.
    Reduce,
    /// Check the ordering conditions of a result.
    Check,
    /// Maximize an outer bound after checking its conditions.
    Bound,
    /// Maximize the achievable sum-rate of a decoding scheme.
    Achieve,
    /// Conditions, outer bound and achievable rate with a capacity verdict.
    Capacity,
    /// Gaussian closed forms and log-det evaluation.
    Gaussian,
    /// Run the built-in identity checks.
    Selftest,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaussianModel {
    /// Two receivers, each served by two transmitters.
    Main4,
    /// Three-user interference channel with unit direct gains.
    Cic3,
    /// Any Gaussian network with one message per transmitter.
    Generic,
}

#[derive(Args, Debug, Clone)]
pub struct Options {
    /// Network file (JSON).
    #[arg(long, global = true)]
    pub network: Option<PathBuf>,
    /// Result whose conditions and outer bound are used, e.g. T3 or many_to_one.
    #[arg(long, global = true)]
    pub theorem: Option<String>,
    /// Decoding scheme: successive, successive_joint or tin.
    #[arg(long, global = true)]
    pub scheme: Option<String>,
    /// Analysis parameters as inline JSON or a path to a JSON file.
    #[arg(long, global = true)]
    pub params: Option<String>,
    /// Grid resolution for pmfs.
    #[arg(long, global = true, default_value_t = 16)]
    pub grid: usize,
    /// Time-sharing alphabet size.
    #[arg(long, global = true, default_value_t = 1)]
    pub q_card: usize,
    /// Message alphabet size; defaults to the largest input alphabet.
    #[arg(long, global = true)]
    pub message_card: Option<usize>,
    /// Largest grid size searched.
    #[arg(long, global = true)]
    pub max_points: Option<u64>,
    /// Largest auxiliary alphabet tried by the falsifier.
    #[arg(long, global = true)]
    pub u_cap: Option<usize>,
    /// Falsifier samples per condition.
    #[arg(long, global = true, default_value_t = 10_000)]
    pub budget: u64,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads.
    #[arg(long, global = true, env = "CAPNET_JOBS")]
    pub jobs: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Receiver order applied before analysis, strongest first, e.g. 2,1,3.
    #[arg(long, global = true)]
    pub receiver_order: Option<String>,
    /// Capacity tolerance.
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = GaussianModel::Generic)]
    pub model: GaussianModel,
    /// Number of power scalings in a Gaussian CSV sweep.
    #[arg(long, global = true, default_value_t = 10)]
    pub power_steps: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli).and_then(|text| commands::write_output(&cli.opts, &text)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("capnet: {}", e);
            ExitCode::from(e.exit_code())
        }
    }
}
