//! Experiment runner and benchmark harness for the token reduction engine.
//!
//! Verbs: `run` (forward + trace report), `flops` (analytic cost),
//! `compare` (prune/merge/transform side by side), `sweep` (kappa/tau grid),
//! `bench` (wall-clock throughput). Exit codes: 0 success, 2 argument or
//! config error, 3 assertion failure.

mod commands;
mod config;
mod harness;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "tokreduce", version, about = "Token reduction as matrix transformation: experiment CLI")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forward pass on synthetic or stored weights; writes a JSON trace report
    Run(commands::run::RunArgs),
    /// Analytic MAC cost report, optionally asserted against a target
    Flops(commands::flops::FlopsArgs),
    /// Class-token error and cost for prune/merge/transform on shared inputs
    Compare(commands::compare::CompareArgs),
    /// Class-token error over a kappa x tau grid
    Sweep(commands::sweep::SweepArgs),
    /// Wall-clock throughput, unreduced vs transform
    Bench(commands::bench::BenchArgs),
}

/// Failure modes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Bad flag value, config file, or weights: exit 2.
    Usage(String),
    /// An `--assert` check did not hold: exit 3.
    Assertion(String),
    /// Anything unexpected: exit 1.
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<tokreduce::Error> for Failure {
    fn from(e: tokreduce::Error) -> Self {
        Failure::Other(anyhow::Error::from(e))
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(anyhow::Error::from(e))
    }
}

pub type CmdResult = Result<(), Failure>;

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => commands::run::exec(args),
        Command::Flops(args) => commands::flops::exec(args),
        Command::Compare(args) => commands::compare::exec(args),
        Command::Sweep(args) => commands::sweep::exec(args),
        Command::Bench(args) => commands::bench::exec(args),
    };
    match result {
        Ok(()) => {}
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(2);
        }
        Err(Failure::Assertion(msg)) => {
            eprintln!("assertion failed: {msg}");
            std::process::exit(3);
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
