//! `spiked-fisher` command-line tool.

mod commands;
mod matrix_io;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit status for configuration and parameter problems.
pub const EXIT_CONFIG: u8 = 2;
/// Exit status for numerical failures (singular noise covariance, p ≥ n).
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_IO: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Library(#[from] spiked_fisher::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Library(e) if !e.is_config() => EXIT_NUMERICAL,
            CliError::Library(_) | CliError::Config(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
            CliError::Internal(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "spiked-fisher", version, about = "Spiked Fisher matrices: limiting law, outlier studies, signal detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Directory for output files (created if missing).
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Worker threads; 0 uses every core. Never changes results.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the limiting spectral density and its edges.
    Law {
        #[arg(long)]
        c: f64,
        #[arg(long)]
        y: f64,
        /// Grid start (default: lower support edge).
        #[arg(long)]
        from: Option<f64>,
        /// Grid end (default: upper support edge).
        #[arg(long)]
        to: Option<f64>,
        #[arg(long, default_value_t = 201)]
        points: usize,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Monte Carlo study of outlier fluctuations.
    SimulateClt {
        /// JSON study configuration.
        config: PathBuf,
        /// Overrides `master_seed` from the configuration.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Detection frequencies along a ladder of dimensions.
    DetectStudy {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Fixed threshold offset above the right edge instead of the default rule.
        #[arg(long)]
        dn_override: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Estimate the number of signals from two data files (rows = variables).
    Detect {
        /// Signal-plus-noise records, p × T.
        #[arg(long)]
        x: PathBuf,
        /// Noise-only records, p × n.
        #[arg(long)]
        z: PathBuf,
        #[arg(long)]
        dn_override: Option<f64>,
        /// Remove per-variable means first.
        #[arg(long)]
        center: bool,
        /// Also write `detection.json` and a manifest here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Write a synthetic (x, z) record pair for `detect`.
    SimulateRecords {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Law {
            c,
            y,
            from,
            to,
            points,
            out_dir,
        } => commands::law(c, y, from, to, points, &out_dir),
        Command::SimulateClt { config, seed, common } => commands::simulate_clt(&config, seed, &common),
        Command::DetectStudy {
            config,
            seed,
            dn_override,
            common,
        } => commands::detect_study(&config, seed, dn_override, &common),
        Command::Detect {
            x,
            z,
            dn_override,
            center,
            out_dir,
        } => commands::detect(&x, &z, dn_override, center, out_dir.as_deref()),
        Command::SimulateRecords { config, seed, out_dir } => commands::simulate_records(&config, seed, &out_dir),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
