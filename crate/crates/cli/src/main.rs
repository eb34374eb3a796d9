//! `superchannel`: reduction, normal forms and diffusion experiments along a
//! resonant channel of a two-degree-of-freedom Hamiltonian.
//!
//! Exit status is 0 when every check passes, 1 when a run is flagged or
//! fails, and 2 on usage errors.

mod commands;
mod config;
mod output;
mod plots;

use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid `{key}`: expected {expected}")]
    Usage { key: String, expected: String },
    #[error(transparent)]
    Library(superchannel::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("missing {0}")]
    Missing(PathBuf),
}

impl CliError {
    pub fn usage(key: &str, expected: impl Into<String>) -> Self {
        Self::Usage { key: key.into(), expected: expected.into() }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    fn exit_code(&self) -> u8 {
        match self {
            Self::Usage { .. } | Self::Library(superchannel::Error::InvalidParameter { .. }) => 2,
            _ => 1,
        }
    }
}

impl From<superchannel::Error> for CliError {
    fn from(e: superchannel::Error) -> Self {
        Self::Library(e)
    }
}

/// Result of a subcommand that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Flagged,
}

impl Status {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Self::Pass
        } else {
            Self::Flagged
        }
    }
}

#[derive(Parser)]
#[command(name = "superchannel", version, about = "Diffusion along resonant channels of nearly integrable Hamiltonians")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
#[group(required = true, multiple = false)]
pub struct SystemArg {
    /// Catalog system (see `catalog`).
    #[arg(long, value_name = "NAME")]
    pub system: Option<String>,
    /// System description in JSON.
    #[arg(long, value_name = "PATH")]
    pub system_file: Option<PathBuf>,
}

#[derive(Args, Clone)]
pub struct OutArg {
    /// Run directory.
    #[arg(long, value_name = "DIR", default_value = "run")]
    pub out: PathBuf,
}

#[derive(Args, Clone)]
pub struct Numerics {
    /// Integrator tolerances.
    #[arg(long, value_name = "ABS,REL", value_parser = config::tolerances)]
    pub tol: Option<(f64, f64)>,
    /// Genericity scan grid.
    #[arg(long, value_name = "NTHETAxNI", value_parser = config::grid)]
    pub grid: Option<(usize, usize)>,
}

#[derive(Subcommand)]
pub enum Command {
    /// Move the resonance to {I2 = 0} and write the reduced system.
    Reduce {
        #[command(flatten)]
        system: SystemArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Build the one- or two-step normal form and report its diagnostics.
    NormalForm {
        #[command(flatten)]
        system: SystemArg,
        #[arg(long, value_name = "E", allow_negative_numbers = true, value_parser = config::positive)]
        epsilon: f64,
        #[arg(long, value_name = "1|2", default_value = "1", value_parser = config::steps)]
        steps: u8,
        /// Generator-flow tolerances.
        #[arg(long, value_name = "ABS,REL", value_parser = config::tolerances)]
        tol: Option<(f64, f64)>,
        /// Also write the remainder on this grid to remainder.csv.
        #[arg(long, value_name = "NTHETAxNI", value_parser = config::grid)]
        grid: Option<(usize, usize)>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Locate the steepest point of the averaged perturbation.
    Genericity {
        #[command(flatten)]
        system: SystemArg,
        #[arg(long, value_name = "NTHETAxNI", value_parser = config::grid)]
        grid: Option<(usize, usize)>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Integrate the system in its own coordinates from the drift start point.
    Simulate {
        #[command(flatten)]
        system: SystemArg,
        #[arg(long, value_name = "E", allow_negative_numbers = true, value_parser = config::non_negative)]
        epsilon: f64,
        /// Integration time; defaults to the drift time delta/epsilon.
        #[arg(long, value_name = "T", allow_negative_numbers = true, value_parser = config::positive)]
        time: Option<f64>,
        #[arg(long, value_name = "T", default_value = "0", allow_negative_numbers = true, value_parser = config::finite)]
        theta2: f64,
        #[command(flatten)]
        numerics: Numerics,
        #[command(flatten)]
        out: OutArg,
    },
    /// Drift experiment over the window tau = delta/epsilon.
    Drift {
        #[command(flatten)]
        system: SystemArg,
        #[arg(long, value_name = "E", allow_negative_numbers = true, value_parser = config::non_negative)]
        epsilon: f64,
        #[arg(long, value_name = "D", allow_negative_numbers = true, value_parser = config::positive)]
        delta: Option<f64>,
        #[arg(long, value_name = "T", default_value = "0", allow_negative_numbers = true, value_parser = config::finite)]
        theta2: f64,
        #[command(flatten)]
        numerics: Numerics,
        #[command(flatten)]
        out: OutArg,
    },
    /// Move I1 between two points of the channel core.
    Connect {
        #[command(flatten)]
        system: SystemArg,
        #[arg(long, value_name = "E", allow_negative_numbers = true, value_parser = config::positive)]
        epsilon: f64,
        #[arg(long, value_name = "I1", allow_negative_numbers = true, value_parser = config::finite)]
        from: f64,
        #[arg(long, value_name = "I1", allow_negative_numbers = true, value_parser = config::finite)]
        to: f64,
        #[arg(long, value_name = "T", default_value = "0", allow_negative_numbers = true, value_parser = config::finite)]
        theta2: f64,
        #[command(flatten)]
        numerics: Numerics,
        #[command(flatten)]
        out: OutArg,
    },
    /// Time to drift by a fixed amount, across several epsilon values.
    Sweep {
        #[command(flatten)]
        system: SystemArg,
        #[arg(long, value_name = "E1,E2,...", value_delimiter = ',', required = true, value_parser = config::positive)]
        epsilons: Vec<f64>,
        #[arg(long, value_name = "X", allow_negative_numbers = true, value_parser = config::positive)]
        target_drift: f64,
        #[arg(long, value_name = "T", default_value = "0", allow_negative_numbers = true, value_parser = config::finite)]
        theta2: f64,
        #[command(flatten)]
        numerics: Numerics,
        #[command(flatten)]
        out: OutArg,
    },
    /// List and verify the built-in systems.
    Catalog,
    /// Write gnuplot scripts for the CSV files of a run directory.
    Plots {
        #[command(flatten)]
        out: OutArg,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::dispatch(cli.command) {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::Flagged) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
