//! `cvqkd`: secret-key rates, parameter sweeps, cloner attacks and protocol
//! runs for reverse-reconciliation Gaussian-modulated CV-QKD.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 domain error,
//! 3 infeasible simulation.

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod args;
mod attack;
mod compare;
mod rate;
mod simulate;
mod sweep;

#[derive(Parser, Debug)]
#[command(
    name = "cvqkd",
    version,
    about = "Reverse-reconciliation CV-QKD key-rate calculator and simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Analytic mutual informations, secret rate and security margins.
    Rate(rate::RateArgs),
    /// CSV table of rates over a parameter grid.
    Sweep(sweep::SweepArgs),
    /// Monte Carlo entangling-cloner attack against the analytic bound.
    Attack(attack::AttackArgs),
    /// Full protocol run with parameter estimation; prints a JSON report.
    Simulate(simulate::SimulateArgs),
    /// Continuous-variable rates next to BB84 references.
    Compare(compare::CompareArgs),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<args::Usage>().is_some() {
        return 1;
    }
    match err.downcast_ref::<cvqkd::Error>() {
        Some(cvqkd::Error::Infeasible(_)) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Rate(a) => rate::run(a),
        Command::Sweep(a) => sweep::run(a),
        Command::Attack(a) => attack::run(a),
        Command::Simulate(a) => simulate::run(a),
        Command::Compare(a) => compare::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
