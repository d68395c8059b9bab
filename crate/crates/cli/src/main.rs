//! Batch front-end for the stochastic porous-medium laboratory: convex
//! calculus tables, ensemble simulation, variational-inequality
//! verification, measure-approximation demos and supercritical-cluster
//! statistics.

// validation guards use `!(x > 0.0)` on purpose: NaN must be rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{approx_demo, convex, simulate, soc_stats, verify_svi};

#[derive(Parser, Debug)]
#[command(name = "spme", version, about = "stochastic porous-medium laboratory")]
struct Cli {
    /// Worker threads for path-parallel runs (0 = automatic)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print tables of a potential's convex calculus
    Convex(convex::ConvexArgs),
    /// Run a configured path ensemble
    Simulate { config: PathBuf },
    /// Verify the variational inequality for a configured candidate
    VerifySvi { config: PathBuf },
    /// Emit the measure-approximation ladder
    ApproxDemo(approx_demo::ApproxDemoArgs),
    /// Supercritical-cluster event log and size histogram
    SocStats { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        // ignore failure when a pool already exists (tests)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    let result = match &cli.command {
        Command::Convex(args) => convex::run(args),
        Command::Simulate { config } => simulate::run(config),
        Command::VerifySvi { config } => verify_svi::run(config),
        Command::ApproxDemo(args) => approx_demo::run(args),
        Command::SocStats { config } => soc_stats::run(config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.exit_code as u8)
        }
    }
}
