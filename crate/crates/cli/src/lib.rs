//! Batch front end for the AoCE solvers: reads an experiment config, runs
//! one of the experiments and writes CSV tables plus a JSON record into a
//! run directory.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use config::ExperimentConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("source is not admissible: {0}")]
    Admissibility(String),
    #[error("existence condition fails:\n{0}")]
    Existence(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Admissibility(_) | CliError::Existence(_) => 1,
            CliError::Solver(_) | CliError::Io(_) => 2,
            CliError::Config(_) => 3,
        }
    }

    /// Sorts a core error into the exit-code classes.
    pub fn from_model(e: aoce_core::Error) -> Self {
        use aoce_core::Error as E;
        match e {
            E::Inadmissible(msg) => CliError::Admissibility(msg),
            E::ExistenceViolated(report) => CliError::Existence(report.to_string()),
            E::Structural(_) | E::Parameter(_) | E::AgeDomain(_) => CliError::Config(e.to_string()),
            other => CliError::Solver(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "aoce",
    version,
    about = "Optimal transmission policies for the age of consecutive error"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the existence condition for every channel in the config.
    Check(CommonArgs),
    /// Solve for the optimal switching thresholds.
    Solve(CommonArgs),
    /// Evaluate the listed baselines next to the optimal policy.
    Compare(CommonArgs),
    /// Solve across truncation sizes and fit the decay of the gap.
    Truncation(CommonArgs),
    /// Simulate the optimal policy and the configured baselines.
    Simulate(CommonArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Check(_) => "check",
            Command::Solve(_) => "solve",
            Command::Compare(_) => "compare",
            Command::Truncation(_) => "truncation",
            Command::Simulate(_) => "simulate",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::Check(a)
            | Command::Solve(a)
            | Command::Compare(a)
            | Command::Truncation(a)
            | Command::Simulate(a) => a,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Run directory; defaults to `runs/<command>-<config digest>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the simulation seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the simulation horizon in slots.
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Run even when the existence condition fails.
    #[arg(long)]
    pub force: bool,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Parses the command line and runs it, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::run(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
