//! Command-line front end: config-driven simulation, spectral
//! inspection, control synthesis and verification, climate scenarios,
//! and the built-in acceptance self-test.
//!
//! Exit codes: 0 success; 2 validation error (config, preconditions,
//! file formats); 3 numerical failure (divergence, unreachable
//! budgets); 4 a verification that ran to completion and failed.

mod commands;
mod config;
mod output;
mod planfile;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use crate::commands::Ctx;
use crate::config::RunConfig;
use crate::output::OutDir;

#[derive(Parser)]
#[command(
    name = "degen-rd",
    about = "Degenerate 1-D reaction-diffusion: simulation, spectra, \
             multiplicative-control synthesis, climate scenarios",
    version
)]
struct Cli {
    /// TOML run configuration (defaults apply when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's output.directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed recorded with every artifact; runs are deterministic in
    /// (config, seed).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for parallel suites (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues and eigenvectors of the diffusion operator.
    Spectrum,
    /// Integrate the reaction-diffusion equation under a fixed control.
    Simulate,
    /// Build a steering control plan and verify it end to end.
    Synthesize,
    /// Re-check a stored plan, optionally at a different resolution.
    Verify,
    /// Run an energy-balance climate scenario.
    Climate,
    /// Run the acceptance suite (optionally only the listed checks).
    Selftest {
        /// Check numbers to run (1-10); all when omitted.
        ids: Vec<usize>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    if let Some(threads) = cli.threads {
        // A second build in the same process (tests) is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let config = match &cli.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    let out_dir = cli
        .out
        .map(|p| p.to_string_lossy().into_owned())
        .unwrap_or_else(|| config.output.directory.clone());
    let ctx = Ctx { config, out: OutDir::new(out_dir)?, seed: cli.seed };

    let code = match &cli.command {
        Command::Spectrum => commands::cmd_spectrum(&ctx)?,
        Command::Simulate => commands::cmd_simulate(&ctx)?,
        Command::Synthesize => commands::cmd_synthesize(&ctx)?,
        Command::Verify => commands::cmd_verify(&ctx)?,
        Command::Climate => commands::cmd_climate(&ctx)?,
        Command::Selftest { ids } => {
            if let Some(bad) = ids.iter().find(|id| !(1..=10).contains(*id)) {
                anyhow::bail!("selftest checks are numbered 1-10, got {bad}");
            }
            commands::cmd_selftest(&ctx, ids)?
        }
    };
    Ok(code as u8)
}

/// Map an error chain onto the exit-code contract: anything rooted in a
/// numerical breakdown is 3, everything else (config parsing, domain
/// preconditions, file formats, I/O) is a validation failure, 2.
fn classify(err: &anyhow::Error) -> u8 {
    use degen_rd::Error as E;
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<E>() {
            return match core {
                E::EigenNoConvergence(_)
                | E::NewtonDiverged { .. }
                | E::NonFiniteState(_)
                | E::BudgetUnreachable { .. }
                | E::FlatnessUnreachable(_) => 3,
                _ => 2,
            };
        }
    }
    2
}
