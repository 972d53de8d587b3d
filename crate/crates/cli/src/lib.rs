//! Command-line harness: generate instances, fit them, scan BIC and compare
//! solvers. Every command reads an experiment spec and writes plot-ready CSV
//! plus a `summary.json` carrying the spec digest.

pub mod commands;
pub mod spec;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Exit codes of the binary.
pub mod exit {
    pub const OK: i32 = 0;
    pub const RUNTIME: i32 = 1;
    pub const MAX_ITER: i32 = 2;
    pub const NUMERICAL_FAILURE: i32 = 3;
    pub const USAGE: i32 = 64;
}

#[derive(Debug, Parser)]
#[command(name = "lrsparse", version, about = "Low-rank plus sparse tensor estimation")]
pub struct Cli {
    /// Seed to run; defaults to the first entry of the spec's `seeds`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides the spec's `out`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Write into a non-empty output directory.
    #[arg(long, global = true)]
    pub force: bool,
    /// Worker threads for grid scans.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an instance directory.
    Synth(SpecArg),
    /// Fit one instance and write the estimate and its trace.
    Fit(FitArgs),
    /// Score a grid of ranks and sparsity levels.
    Bic(BicArgs),
    /// Run the Riemannian solver and the projected-gradient baseline on
    /// the same instance.
    Compare(InputArgs),
}

#[derive(Debug, Args)]
pub struct SpecArg {
    /// Experiment spec file.
    #[arg(long)]
    pub spec: PathBuf,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[command(flatten)]
    pub spec: SpecArg,
    /// Instance directory written by `synth`; generated from the spec when
    /// absent.
    #[arg(long)]
    pub instance: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Bare observation tensor; the model comes from the spec and no truth
    /// is available.
    #[arg(long, conflicts_with = "instance")]
    pub observation: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BicArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Rank grid such as `1,1,1;2,2,2`; overrides the spec's `rank_grid`.
    #[arg(long)]
    pub ranks: Option<String>,
    /// Comma-separated sparsity levels; overrides the spec's `alpha_grid`.
    #[arg(long)]
    pub alphas: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl From<spec::SpecError> for CliError {
    fn from(e: spec::SpecError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<lrsparse_core::Error> for CliError {
    fn from(e: lrsparse_core::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    match commands::dispatch(&cli) {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            exit::USAGE
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            exit::RUNTIME
        }
    }
}
