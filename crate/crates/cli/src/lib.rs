//! Command-line runner for the spinlap experiments.

// `!(x > 0.0)` guards are written that way so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use std::fmt;

pub use output::{Cell, Report, RunManifest, Table};

#[derive(Debug)]
pub enum CliError {
    /// Malformed or physically invalid configuration.
    Config(String),
    /// Solver failed to converge or produced non-finite values.
    Numerical(String),
    /// A cross-check found a mismatch.
    Check(String),
    Io(std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Check(m) => write!(f, "check failed: {m}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<spinlap_core::error::Error> for CliError {
    fn from(e: spinlap_core::error::Error) -> Self {
        use spinlap_core::error::Error as E;
        match e {
            E::NonConvergence { .. } | E::NonFinite { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Check(_) | CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "spinlap", version, about = "Orientation-density spin experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct GlobalArgs {
    /// Config file: `key = value` lines or a JSON object.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub samples: Option<u64>,
    /// Output directory; overrides $SPINLAP_OUT_DIR and the config file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_parser = ["csv", "json"])]
    pub format: Option<String>,
    /// Override any config key, e.g. `-p tau_plus=2`.
    #[arg(short = 'p', long = "param", global = true, value_name = "KEY=VALUE")]
    pub params: Vec<String>,
}

#[derive(Debug, Subcommand, Clone)]
pub enum Command {
    /// Solve for the orientation density and compare with closed forms.
    Variational,
    /// Measurement statistics and displacement histograms.
    SternGerlach {
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        order: Option<u64>,
    },
    /// CHSH statistic at configurable angles.
    BellTest {
        #[arg(long)]
        state: Option<String>,
    },
    /// CHSH statistic against the delay between the two measurements.
    BellDelay {
        #[arg(long)]
        tau_plus: Option<f64>,
        #[arg(long)]
        tau_minus: Option<f64>,
        #[arg(long)]
        max_ratio: Option<f64>,
    },
    /// Spinor field evolution with density/phase snapshots.
    Pauli {
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        bz: Option<f64>,
    },
    /// Uncertainty product, angular momentum and Fisher checks.
    Fluctuations {
        #[arg(long)]
        omega: Option<f64>,
    },
    /// Cross-check the model against the Hilbert-space oracle.
    OracleCheck {
        #[arg(long)]
        pairs: Option<u64>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Variational => "variational",
            Command::SternGerlach { .. } => "stern-gerlach",
            Command::BellTest { .. } => "bell-test",
            Command::BellDelay { .. } => "bell-delay",
            Command::Pauli { .. } => "pauli",
            Command::Fluctuations { .. } => "fluctuations",
            Command::OracleCheck { .. } => "oracle-check",
        }
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::run(&cli) {
        Ok(outcome) => {
            println!("{}", outcome.summary_line());
            0
        }
        Err(e) => {
            eprintln!("spinlap {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}
