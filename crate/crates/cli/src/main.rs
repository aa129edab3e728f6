//! `opinionlab`: equilibria, administrator sweeps and SBM studies from the
//! command line. Every command writes CSV into `--out-dir`.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use opinionlab::SupportMode;

#[derive(Debug, Parser)]
#[command(
    name = "opinionlab",
    version,
    about = "Friedkin-Johnsen opinion dynamics experiments"
)]
pub struct Cli {
    /// Flat `key = value` file supplying defaults for any long flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the equilibrium and report its metrics.
    Equilibrium(DataArgs),
    /// Run the administrator dynamics across an ε grid.
    AdminSweep(SweepArgs),
    /// Same as admin-sweep with the L2-regularized administrator (γ > 0).
    RegSweep(SweepArgs),
    /// Stochastic block model studies.
    #[command(subcommand)]
    Sbm(SbmCommand),
    /// Parse and summarize input files without running anything.
    IngestCheck(DataArgs),
}

#[derive(Debug, Args, Clone)]
pub struct DataArgs {
    /// Edge list: `i j w` per line, 0-based, each pair once.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// One opinion per line; the line count fixes the node count.
    #[arg(long)]
    pub opinions: Option<PathBuf>,
    /// Treat the opinions as expressed equilibria and recover innate ones.
    #[arg(long)]
    pub opinions_are_expressed: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads (default: all logical cores).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args, Clone)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated ascending budgets, e.g. `0,0.1,0.3,0.5`.
    #[arg(long)]
    pub epsilon_grid: Option<String>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_parser = parse_support)]
    pub support: Option<SupportMode>,
    /// Cap on administrator rounds per ε.
    #[arg(long)]
    pub max_rounds: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum SbmCommand {
    /// Compare sampled equilibrium polarization with the closed form.
    Verify(VerifyArgs),
    /// Mean polarization across a grid of cross-community probabilities.
    Sweep(SbmSweepArgs),
}

#[derive(Debug, Args, Clone)]
pub struct SbmCommon {
    /// Community size (the graph has 2n nodes).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, env = "OPINIONLAB_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args, Clone)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: SbmCommon,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long, value_enum)]
    pub source: Option<Source>,
}

#[derive(Debug, Args, Clone)]
pub struct SbmSweepArgs {
    #[command(flatten)]
    pub common: SbmCommon,
    /// Comma-separated cross-community probabilities.
    #[arg(long)]
    pub q_grid: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Source {
    Sampled,
    Expected,
}

fn parse_support(s: &str) -> Result<SupportMode, String> {
    s.parse().map_err(|e: opinionlab::Error| e.to_string())
}

/// Bad flag values or config entries; exits with status 2 like clap does.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Some sweep rows failed; the CSV was still written.
#[derive(Debug)]
pub struct PartialFailure(pub usize);

impl std::fmt::Display for PartialFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} sweep point(s) failed; see the status column", self.0)
    }
}

impl std::error::Error for PartialFailure {}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else if e.downcast_ref::<PartialFailure>().is_some() {
                ExitCode::from(3)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
