//! Command-line front end.
//!
//! `run` executes the optimization described by a `key = value` config file
//! and writes CSV/VTK outputs; `check-gradient` verifies the two sensitivity
//! pipelines against finite differences on the configured problem;
//! `mesh-info` prints statistics of the generated mesh without solving
//! anything.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use contact_topopt::config::load_config;
use contact_topopt::driver::{check_gradient, mesh_info, run};

#[derive(Parser)]
#[command(
    name = "contact-topopt",
    version,
    about = "Shape and topology optimization of elastic bodies in frictional contact"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the optimization configured in a key = value file.
    Run {
        /// Path to the configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the configured random seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare assembled derivatives with finite differences.
    CheckGradient {
        /// Path to the configuration file.
        #[arg(long)]
        config: PathBuf,
    },
    /// Print statistics of the configured mesh.
    MeshInfo {
        /// Path to the configuration file.
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.class());
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> contact_topopt::Result<()> {
    match cli.command {
        Command::Run { config, out, seed } => {
            let mut cfg = load_config(&config)?;
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let summary = run(&cfg)?;
            println!(
                "{}: {} iterations, objective {:.6e}, volume {:.6}, {}",
                summary.algorithm.name(),
                summary.iterations,
                summary.final_objective,
                summary.final_volume,
                if summary.converged { "converged" } else { "stopped before the tolerance" },
            );
            println!("outputs written to {}", summary.out_dir.display());
            Ok(())
        }
        Command::CheckGradient { config } => {
            let cfg = load_config(&config)?;
            print!("{}", check_gradient(&cfg)?);
            Ok(())
        }
        Command::MeshInfo { config } => {
            let cfg = load_config(&config)?;
            print!("{}", mesh_info(&cfg)?);
            Ok(())
        }
    }
}
