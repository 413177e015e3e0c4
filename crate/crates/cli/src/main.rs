//! `swarmtopo`: two-stage resilient topology control for UAV swarms.
//!
//! Offline, a QUBO over candidate links is sampled repeatedly under a
//! diversity penalty to produce a portfolio of distinct high-quality
//! topologies; online, a lightweight utility rule selects among them as the
//! network drifts. Subcommands cover scenario generation, both stages, the
//! fragility-weight sweep, and the diversity bench.

mod commands;
mod config;

use clap::{Parser, Subcommand};

use commands::{
    cmd_bench_diversity, cmd_offline, cmd_online, cmd_scenario, cmd_solve, cmd_sweep_beta,
    BenchDiversityArgs, OfflineArgs, OnlineArgs, ScenarioArgs, SolveArgs, SweepBetaArgs,
};

#[derive(Parser)]
#[command(
    name = "swarmtopo",
    version,
    about = "Two-stage resilient topology control for UAV swarms",
    after_help = "Values come from built-in defaults, overridden by --config, \
                  overridden by flags. Every command honors --seed and is \
                  reproducible byte-for-byte."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a centralization-family snapshot (I0..I4)
    Scenario(ScenarioArgs),
    /// Stage 1: generate a diverse candidate portfolio from the QUBO
    Offline(OfflineArgs),
    /// Stage 2: run the dynamic-vs-static retention experiment
    Online(OnlineArgs),
    /// Sweep the fragility weight beta and record the trade-off
    SweepBeta(SweepBetaArgs),
    /// Compare candidate diversity with and without the penalty
    BenchDiversity(BenchDiversityArgs),
    /// One-shot QUBO solve for a snapshot
    Solve(SolveArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Scenario(args) => cmd_scenario(args),
        Command::Offline(args) => cmd_offline(args),
        Command::Online(args) => cmd_online(args),
        Command::SweepBeta(args) => cmd_sweep_beta(args),
        Command::BenchDiversity(args) => cmd_bench_diversity(args),
        Command::Solve(args) => cmd_solve(args),
    };
    if let Err(error) = result {
        eprintln!("error: {error:#}");
        std::process::exit(1);
    }
}
