//! `eamqc`: runs the chain experiments and writes CSV artifacts.
//!
//! Exit status: 0 when every check passes, 1 when a check fails, 2 for a
//! configuration error, 3 for a numerical or I/O failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{Command, ExperimentConfig, Overrides};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure in {0}")]
    Numerical(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "eamqc", version, about = "EAM chain: atomistic, QNL and QCL experiments")]
struct Args {
    /// Experiment to run; may instead come from the config file.
    #[arg(value_enum)]
    command: Option<Command>,
    /// `key = value` file with any of: command, potential, f, bracket, n, k, out, seed.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in name (default, embedding-dominated, pair-only) or a potential file.
    #[arg(long)]
    potential: Option<String>,
    /// Macroscopic strain, or a comma-separated list.
    #[arg(long)]
    f: Option<String>,
    /// Search interval for critical strains, `lo,hi`.
    #[arg(long)]
    bracket: Option<String>,
    /// Comma-separated, strictly increasing chain sizes.
    #[arg(long)]
    n: Option<String>,
    /// Atomistic half-width: `8`, `8,16,32` or `power:θ`.
    #[arg(long)]
    k: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized checks.
    #[arg(long)]
    seed: Option<u64>,
}

fn run(args: Args) -> Result<bool, CliError> {
    let flags = Overrides {
        command: args.command,
        potential: args.potential,
        f: args.f,
        bracket: args.bracket,
        n: args.n,
        k: args.k,
        out: args.out,
        seed: args.seed,
    };
    let config = ExperimentConfig::resolve(args.config.as_deref(), flags)?;
    println!("{} with potential {}", config.command.name(), config.potential_source);
    commands::run(&config)
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("eamqc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
