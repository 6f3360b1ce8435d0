//! Scenario runner behind the `dqho` binary: `run`, `sweep` and `fp-compare`.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 numerical failure,
//! 3 fp-compare acceptance failure.

mod config;
mod output;
mod scenario;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use config::{Engine, RunConfig, SweepAxis, SweepParam, MAX_SWEEP_CELLS};
pub use output::{fmt_float, NULL_NOTE};
pub use scenario::{
    compute_scenario, fp_compare, run_scenario, sweep, ConvergenceRow, FpCompareReport, Scales,
    ScenarioResult, SeriesRow, FP_COMPARE_SIZES,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Model(#[from] crate::Error),

    #[error("fp-compare failed: {0}")]
    Acceptance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Model(e) if e.is_numerical() => 2,
            CliError::Model(_) => 1,
            CliError::Acceptance(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "dqho",
    version,
    about = "Damped quantum harmonic oscillator scenarios"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output directory (overrides `[output] dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Relative tolerance of the moment ODE integrator.
    #[arg(long, global = true, value_name = "REL")]
    pub tol_override: Option<f64>,

    /// Reserved; every engine is deterministic.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Suppress the summary on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve one scenario and write timeseries.csv, scales.json, compare.csv.
    Run { config: PathBuf },
    /// Evaluate a grid of scenarios over up to two parameters into sweep.csv.
    Sweep { config: PathBuf },
    /// Convergence study of the Fokker-Planck solver against the moment ODE.
    FpCompare { config: PathBuf },
}

fn load(path: &Path, cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::from_path(path)?;
    if let Some(dir) = &cli.out {
        cfg.out_dir = dir.clone();
    }
    if let Some(rtol) = cli.tol_override {
        if !(rtol > 0.0 && rtol < 1.0) {
            return Err(CliError::Config(format!(
                "--tol-override: must lie in (0, 1), got {rtol}"
            )));
        }
        cfg.rtol = rtol;
    }
    Ok(cfg)
}

/// Runs a parsed command line and returns the process exit code.
pub fn execute(cli: &Cli) -> i32 {
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = load(config, cli)?;
            let result = run_scenario(&cfg)?;
            if !cli.quiet {
                print_warnings(&result.warnings);
                println!("{}", result.summary());
                println!("wrote {}", cfg.out_dir.display());
            }
        }
        Command::Sweep { config } => {
            let cfg = load(config, cli)?;
            let (cells, failed) = sweep(&cfg)?;
            if !cli.quiet {
                println!(
                    "{cells} cells, {failed} failed; wrote {}",
                    cfg.out_dir.join("sweep.csv").display()
                );
            }
        }
        Command::FpCompare { config } => {
            let cfg = load(config, cli)?;
            let report = fp_compare(&cfg)?;
            if !cli.quiet {
                for row in &report.rows {
                    println!("{row}");
                }
            }
            if let Some(reason) = report.failure() {
                return Err(CliError::Acceptance(reason));
            }
        }
    }
    Ok(())
}

fn print_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}
