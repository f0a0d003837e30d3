//! Command-line front end for the tomography toolkit.
//!
//! Four subcommands — `simulate`, `reconstruct`, `adaptive`, `evaluate` —
//! share the same shape: a JSON configuration file, optional dotted-path
//! overrides, an output directory, and an optional seed. Exit codes separate
//! failure classes: 2 for configuration or usage problems, 3 for numerical
//! failures, 4 for I/O.

// Validation guards are written `!(x > 0.0)` so that NaN fails them; the
// lint's suggested `x <= 0.0` would let NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::{CheckpointArgs, CommandError, Method};
use config::LoadedConfig;

#[derive(Parser)]
#[command(
    name = "radiotomo",
    version,
    about = "Radio tomography: scene synthesis, field reconstruction, \
             adaptive measurement selection, and method evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Arguments every subcommand takes.
#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if absent.
    #[arg(long)]
    out: PathBuf,
    /// Dotted-path configuration override, e.g. scene.grid.nx=30 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Replaces the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic scene: truth labels, loss field, and a measurement log.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Reconstruct a loss field from a recorded data directory.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Directory holding scene.json and measurements.csv.
        #[arg(long)]
        data: PathBuf,
        /// Reconstruction method.
        #[arg(long, value_enum, default_value_t = MethodArg::Vb)]
        method: MethodArg,
        /// Write the final solver state here (vb only).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Resume the solver from this saved state (vb only).
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Run the measurement-selection loop, reconstructing after each batch.
    Adaptive {
        #[command(flatten)]
        common: Common,
        /// Recorded data directory (required when selection.source = "file").
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Compare the methods over Monte Carlo repetitions of the configured scene.
    Evaluate {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    /// Variational posterior over field, labels, and hyperparameters.
    Vb,
    /// Regularized least squares with a field covariance.
    Ridge,
    /// Total-variation regularized least squares.
    Tv,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Vb => Method::Vb,
            MethodArg::Ridge => Method::Ridge,
            MethodArg::Tv => Method::Tv,
        }
    }
}

/// Reads and validates the configuration named by the common arguments.
fn load(common: &Common) -> Result<LoadedConfig, CommandError> {
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| CommandError::Io(format!("reading {}: {e}", common.config.display())))?;
    config::load_config(&text, &common.set, common.seed).map_err(Into::into)
}

fn run(cli: Cli) -> Result<(), CommandError> {
    match cli.command {
        Command::Simulate { common } => {
            let loaded = load(&common)?;
            commands::cmd_simulate(&loaded, &common.out)
        }
        Command::Reconstruct {
            common,
            data,
            method,
            checkpoint,
            resume,
        } => {
            let loaded = load(&common)?;
            let checkpoint = CheckpointArgs {
                save: checkpoint,
                resume,
            };
            commands::cmd_reconstruct(&loaded, &data, method.into(), &checkpoint, &common.out)
        }
        Command::Adaptive { common, data } => {
            let loaded = load(&common)?;
            commands::cmd_adaptive(&loaded, data.as_deref(), &common.out)
        }
        Command::Evaluate { common } => {
            let loaded = load(&common)?;
            commands::cmd_evaluate(&loaded, &common.out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("radiotomo: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
