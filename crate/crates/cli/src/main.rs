//! `tcdmrg`: ground states of the transcorrelated Fermi-Hubbard model from a
//! TOML experiment file.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use crate::commands::Status;
use crate::config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "tcdmrg", version, about = "Transcorrelated Fermi-Hubbard ground states by DMRG")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run DMRG and write the per-sweep trace and a summary.
    Run(Common),
    /// Exact ground energy of the configured sector.
    Ed(Common),
    /// Bond dimensions of the Hubbard and transcorrelated MPOs.
    MpoStats(Common),
    /// DMRG over a grid of bond dimensions and J values.
    Scan(ScanArgs),
}

#[derive(Args)]
struct Common {
    /// Experiment file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output file; overrides output.path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Raise the exact-diagonalization size cap.
    #[arg(long)]
    slow: bool,
    /// Overrides dmrg.seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    common: Common,
    /// Bond dimensions, comma separated; overrides scan.m.
    #[arg(long, value_delimiter = ',')]
    m_list: Vec<usize>,
    /// J values, comma separated; overrides scan.j.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    j_list: Vec<f64>,
}

fn load(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        cfg.dmrg.seed = seed;
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<Status> {
    match cli.command {
        Command::Run(c) => commands::run(&load(&c)?, c.out.as_deref()),
        Command::Ed(c) => commands::ed(&load(&c)?, c.out.as_deref(), c.slow),
        Command::MpoStats(c) => commands::mpo_stats(&load(&c)?, c.out.as_deref()),
        Command::Scan(s) => commands::scan(&load(&s.common)?, s.common.out.as_deref(), &s.m_list, &s.j_list),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Unconverged) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
