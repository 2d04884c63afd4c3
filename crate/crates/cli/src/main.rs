//! Command-line front end for the heterogeneous-network transceiver designs.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use config::{Overrides, RunConfig, Scale};

#[derive(Parser)]
#[command(name = "hetnet-mse", version, about = "MSE-based transceiver design for two-tier networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration (defaults are used when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo work (0 = one per core). Never changes results.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    scale: Option<Scale>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Write one channel realization.
    Gen,
    /// Design every configured scheme on one realization.
    Run,
    /// Monte Carlo sweep of MSE and BER.
    Sweep,
    /// Learning curves averaged over random initializations.
    Curve,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let overrides = Overrides { seed: cli.seed, workers: cli.workers, out_dir: cli.out.clone(), scale: cli.scale };
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    };
    let cfg = match cfg.map(|c| c.resolve(&overrides)) {
        Ok(c) => c,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Err(m) = cfg.validate() {
        error!("command line: {m}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let result = match cli.command {
        Command::Gen => commands::gen(&cfg),
        Command::Run => commands::run(&cfg),
        Command::Sweep => commands::sweep(&cfg),
        Command::Curve => commands::curve(&cfg),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            match e {
                hetnet_mse::Error::Config(_) => ExitCode::from(EXIT_CONFIG),
                ref e if e.is_numerical() => ExitCode::from(EXIT_NUMERICAL),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
