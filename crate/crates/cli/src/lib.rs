// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line front end: CSV ingestion, detection runs with JSON/CSV
//! reports, and the simulation experiment tables.

pub mod csvio;
pub mod detect;
pub mod experiment;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use corrshift::simlab::{market_prices, MarketSpec};

use detect::{run_detect, DetectArgs};
use experiment::{run_experiment, ExperimentArgs};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "CORRSHIFT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "corrshift", version, about = "Change points in the correlation structure of panels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect change points in one or more CSV panels.
    Detect(DetectArgs),
    /// Regenerate a simulation table.
    Experiment(ExperimentArgs),
    /// Write a synthetic price panel with one correlation break as CSV.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    /// Number of returns; the file holds one more row of prices.
    #[arg(long = "T", default_value_t = 2000)]
    pub len: usize,
    /// Last return index of the calm regime; defaults to 60% of T.
    #[arg(long)]
    pub break_at: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let spec = MarketSpec {
        n: args.n,
        len: args.len,
        break_at: args.break_at.unwrap_or(args.len * 3 / 5),
        ..MarketSpec::desk_default(args.seed)
    };
    let panel = market_prices(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    std::fs::write(&args.out, csvio::panel_to_csv(&panel, "date"))
        .map_err(|e| CliError::Data(format!("{}: {e}", args.out.display())))
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("{THREADS_ENV}={raw:?} is not a thread count")))?;
    // A pool that is already running is kept as is.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Detect(a) => run_detect(a).map(|o| o.exit_code),
        Command::Experiment(a) => run_experiment(a).map(|_| 0),
        Command::Simulate(a) => run_simulate(a).map(|()| 0),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("corrshift: {e}");
            e.exit_code()
        }
    }
}
