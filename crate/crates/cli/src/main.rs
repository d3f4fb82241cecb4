//! `scmref`: solve, explore, size and analyze SCM-based CWT current
//! references from one TOML config.
//!
//! Exit codes: 0 success, 2 config/user error, 3 numerical failure. Errors
//! are also emitted as one JSON object on stderr.

// As in the core crate, `!(x > y)` guards deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{OutputFormat, RunConfig};

#[derive(Debug)]
pub enum CliError {
    /// Bad config, bad file, bad user input: exit 2.
    Config(String),
    /// Solver / model failure during computation: exit 3.
    Numerical(String),
}

impl CliError {
    /// Core errors raised while building inputs are the user's to fix.
    pub fn from_config_stage(e: scmref::Error) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numerical(_) => "numerical",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<scmref::Error> for CliError {
    /// Computation-stage mapping: domain/input problems are config errors,
    /// everything else is a numerical failure.
    fn from(e: scmref::Error) -> Self {
        use scmref::Error::*;
        match e {
            Domain(_) | InvalidInput(_) => CliError::Config(e.to_string()),
            SolverFailure { .. }
            | InfeasibleDesign(_)
            | M1Saturated { .. }
            | DegenerateDesign { .. }
            | LutRange(_) => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "scmref",
    version,
    about = "Design-space exploration and sizing for SCM CWT current references"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides [output].dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format (overrides [output].format).
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Monte-Carlo seed (overrides [mc].seed).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve operating points over the temperature grid.
    Solve(CommonArgs),
    /// TC map, valley extraction and affine valley fits.
    Valley(CommonArgs),
    /// Run the step 2-4 methodology loop and emit transistor sizes.
    Size(CommonArgs),
    /// Variability: first-order estimate or nonlinear Monte Carlo.
    Mc(CommonArgs),
    /// Small-signal line-sensitivity and dominant-pole report.
    Smallsignal(CommonArgs),
}

struct Ctx {
    cfg: RunConfig,
    out_dir: PathBuf,
    format: OutputFormat,
    seed_override: Option<u64>,
}

fn load_ctx(args: &CommonArgs) -> Result<Ctx, CliError> {
    let cfg = RunConfig::load(&args.config)?;
    let out_dir = args.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let format = args.format.unwrap_or(cfg.output.format);
    Ok(Ctx {
        cfg,
        out_dir,
        format,
        seed_override: args.seed,
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Solve(a) => commands::solve::run(&load_ctx(a)?),
        Command::Valley(a) => commands::valley::run(&load_ctx(a)?),
        Command::Size(a) => commands::size::run(&load_ctx(a)?),
        Command::Mc(a) => commands::mc::run(&load_ctx(a)?),
        Command::Smallsignal(a) => commands::smallsignal::run(&load_ctx(a)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({
                    "error": { "kind": e.kind(), "message": e.message() }
                })
            );
            match e {
                CliError::Config(_) => ExitCode::from(2),
                CliError::Numerical(_) => ExitCode::from(3),
            }
        }
    }
}
