//! `arat`: validate, solve, verify and simulate constrained ARAT Markov games
//! stored as JSON.
//!
//! Exit codes: 0 on success, 1 when a check reports failure (invalid instance,
//! failed verification, no convergence, infeasible best response), 2 on usage
//! errors and unreadable or ill-formed files.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use arat_core::IterationConfig;

#[derive(Debug, Parser)]
#[command(name = "arat", version, about = "Constrained ARAT Markov games: equilibria, best responses, simulation")]
struct Cli {
    /// Print the JSON report on standard output instead of the summary.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check an instance file; exit 0 iff it is valid.
    Validate { instance: PathBuf },
    /// Run damped best-response iteration from the uniform profile.
    Solve {
        instance: PathBuf,
        #[command(flatten)]
        iteration: IterationArgs,
        /// Write the equilibrium report (usable as a profile file).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the occupation measure of the final profile.
        #[arg(long)]
        dump_occupation: Option<PathBuf>,
    },
    /// Constrained best response of one player to the other's policy.
    BestResponse {
        instance: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        player: u8,
        /// Profile file (the opponent's table is used) or `{"pi": [[...]]}`.
        #[arg(long)]
        opponent: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a profile for the epsilon-Nash conditions.
    Verify {
        instance: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        epsilon: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo estimates of payoffs, constraints and the occupation measure.
    Simulate {
        instance: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        episodes: usize,
        #[arg(long, default_value_t = 200)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a seeded random instance.
    Generate {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        states: usize,
        #[arg(long)]
        actions1: usize,
        #[arg(long)]
        actions2: usize,
        #[arg(long, default_value_t = 1)]
        p: usize,
        #[arg(long, default_value_t = 0.9)]
        beta: f64,
        /// Make rewards, constraints and transitions independent of the opponent.
        #[arg(long)]
        decoupled: bool,
        /// Defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the perturbed games n = 0..=N and check the last on the original.
    Perturb {
        instance: PathBuf,
        #[arg(long)]
        n_max: usize,
        #[command(flatten)]
        iteration: IterationArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct IterationArgs {
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Policy-change stopping tolerance.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Tolerance of the final epsilon-Nash check.
    #[arg(long)]
    epsilon: Option<f64>,
}

impl IterationArgs {
    fn config(&self) -> IterationConfig {
        let d = IterationConfig::default();
        IterationConfig {
            max_iterations: self.max_iter.unwrap_or(d.max_iterations),
            damping: self.damping.unwrap_or(d.damping),
            tolerance: self.tolerance.unwrap_or(d.tolerance),
            epsilon: self.epsilon.unwrap_or(d.epsilon),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("arat: {e}");
            ExitCode::from(e.code())
        }
    }
}
