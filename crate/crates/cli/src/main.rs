mod commands;
mod provenance;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rockfrag::features::SignalSource;
use rockfrag::relative::Confidence;
use rockfrag::simulate::FIVE_PILES;

/// Relative rock fragmentation estimates from excavation telemetry.
#[derive(Debug, Parser)]
#[command(name = "rockfrag", version, about)]
pub struct Cli {
    /// Pipeline configuration (TOML). Unset keys keep their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for simulated campaigns.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Signal sources, comma separated.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_source)]
    pub source: Vec<SignalSource>,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

fn parse_source(s: &str) -> Result<SignalSource, String> {
    s.parse().map_err(|e: rockfrag::Error| e.to_string())
}

fn parse_confidence(s: &str) -> Result<Confidence, String> {
    s.parse().map_err(|e: rockfrag::Error| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic campaign with ground truth.
    Simulate(SimulateArgs),
    /// Detect excavation windows and compute wavelet features.
    Features(FeaturesArgs),
    /// Fit a Rosin-Rammler model to a sieve table.
    FitRr(FitRrArgs),
    /// Calibrate reference ζ statistics.
    Calibrate(CalibrateArgs),
    /// Relative size table against a reference pile.
    Estimate(EstimateArgs),
    /// Classify trials as smaller, indistinguishable or larger.
    Classify(ClassifyArgs),
    /// Granulometry, sieve ratios and (optionally) feature ratios in one report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Campaign preset: `five-piles` or a single pile label.
    #[arg(long, default_value = FIVE_PILES)]
    pub preset: String,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub payload_kg: Option<f64>,
    /// Operators assigned to trials in turn.
    #[arg(long, value_delimiter = ',')]
    pub operators: Vec<String>,
    /// Days assigned to trials in turn.
    #[arg(long, value_delimiter = ',')]
    pub days: Vec<u32>,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// Directory searched recursively for trial manifests.
    pub dir: PathBuf,
    /// Also emit β rows.
    #[arg(long)]
    pub with_beta: bool,
}

#[derive(Debug, Args)]
pub struct FitRrArgs {
    /// Sieve CSV (`sieve_mm,passing_pct`).
    pub sieve: Option<PathBuf>,
    /// Use a bundled sieve table instead (0/32, 0/63, 0/90, 0/150).
    #[arg(long, conflicts_with = "sieve")]
    pub fixture: Option<String>,
    #[arg(long, default_value_t = 0.15)]
    pub p_lo: f64,
    #[arg(long, default_value_t = 0.90)]
    pub p_hi_min: f64,
    #[arg(long, default_value_t = 0.96)]
    pub p_hi_max: f64,
    /// Refine the linearized fit by nonlinear least squares.
    #[arg(long)]
    pub refined: bool,
}

#[derive(Debug, Args, Clone)]
pub struct ReferenceArgs {
    /// Reference pile label.
    #[arg(long)]
    pub reference: Option<String>,
    /// Restrict calibration to one operator.
    #[arg(long)]
    pub operator: Option<String>,
    /// Restrict to one sensor epoch.
    #[arg(long)]
    pub epoch: Option<u32>,
    /// Known mean size of the reference pile, mm.
    #[arg(long)]
    pub xbar_mm: Option<f64>,
    /// Confidence of the z rule: 0.90, 0.95 or 0.99.
    #[arg(long, value_parser = parse_confidence)]
    pub p: Option<Confidence>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Feature report (features.csv or features.json).
    pub features: PathBuf,
    #[command(flatten)]
    pub reference: ReferenceArgs,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Feature report (features.csv or features.json).
    pub features: Option<PathBuf>,
    #[command(flatten)]
    pub reference: ReferenceArgs,
    /// Ratios of the bundled sieve mean sizes instead of features.
    #[arg(long)]
    pub sieve_only: bool,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    pub features: PathBuf,
    /// Output of `calibrate`.
    #[arg(long)]
    pub calibration: PathBuf,
    #[arg(long, value_parser = parse_confidence)]
    pub p: Option<Confidence>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Optional feature report to include.
    pub features: Option<PathBuf>,
    #[command(flatten)]
    pub reference: ReferenceArgs,
}

/// Error with its process exit code: 1 usage or configuration, 2 data,
/// 3 internal.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub msg: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError {
            code: 1,
            msg: msg.into(),
        }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError {
            code: 2,
            msg: msg.into(),
        }
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        CliError {
            code: 3,
            msg: msg.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl From<rockfrag::Error> for CliError {
    fn from(e: rockfrag::Error) -> Self {
        match e {
            rockfrag::Error::Config(_) => CliError::usage(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = std::panic::catch_unwind(|| commands::run(&cli))
        .unwrap_or_else(|_| Err(CliError::internal("internal error (panic)")));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
