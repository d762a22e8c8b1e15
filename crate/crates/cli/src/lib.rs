//! Command-line harness for `hilbert-ops`: dataset generators, experiment
//! commands and versioned JSON metrics reports.
//!
//! Every command resolves a flat JSON config (defaults, then `--config`, then
//! flags, then `--seed`), writes its artifacts into `--out`, and finishes with
//! `report.json`. Outputs are a pure function of the resolved config.

pub mod commands;
pub mod config;
pub mod datagen;
pub mod error;
pub mod report;
pub mod rng;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::Context;
use crate::error::CliResult;

/// Caps the worker threads used by parallel trials.
pub const THREADS_ENV: &str = "HILBERT_OPS_THREADS";

#[derive(Debug, Parser)]
#[command(name = "hilbert-ops", version, about = "Operator estimation experiments in discretized Hilbert spaces")]
pub struct Cli {
    /// JSON object with parameters for the chosen command.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random draw; required unless the config sets it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory receiving artifacts and report.json.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Basis analysis/synthesis round trips and Hilbert identities.
    Basis(commands::basis::BasisArgs),
    /// Kernel ridge regression fit, prediction and errors.
    Krr(commands::krr::KrrArgs),
    /// Convolution check and learnable spectral thresholds.
    Filter(commands::filter::FilterArgs),
    /// Wavelet scattering coefficients and stability checks.
    Scatter(commands::scatter::ScatterArgs),
    /// EDMD fit, Koopman eigenvalues and forecasts.
    Koopman(commands::koopman::KoopmanArgs),
    /// Relation operators, composition and analogies.
    Reason(commands::reason::ReasonArgs),
    /// ISTA/FISTA sparse recovery trials.
    Recover(commands::recover::RecoverArgs),
    /// Write synthetic datasets.
    GenData(commands::gen_data::GenDataArgs),
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| error::CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {value:?}")))?;
    // a pool that is already built (e.g. repeated in-process runs) is kept
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs the parsed command and returns the path of its report.
pub fn execute(cli: &Cli) -> CliResult<PathBuf> {
    configure_threads()?;
    let ctx = Context {
        file: config::load_file(cli.config.as_deref())?,
        seed: cli.seed,
        out_dir: cli.out.clone(),
    };
    match &cli.command {
        Command::Basis(a) => commands::basis::run(a, &ctx),
        Command::Krr(a) => commands::krr::run(a, &ctx),
        Command::Filter(a) => commands::filter::run(a, &ctx),
        Command::Scatter(a) => commands::scatter::run(a, &ctx),
        Command::Koopman(a) => commands::koopman::run(a, &ctx),
        Command::Reason(a) => commands::reason::run(a, &ctx),
        Command::Recover(a) => commands::recover::run(a, &ctx),
        Command::GenData(a) => commands::gen_data::run(a, &ctx),
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(path) => {
            println!("wrote {}", path.display());
            0
        }
        Err(e) => {
            eprintln!("hilbert-ops: {}", e.diagnostic());
            e.exit_code()
        }
    }
}
