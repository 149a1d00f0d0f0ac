//! `copdiff`: simulate, fit and test copula-based diffusion models.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ConfigEcho, RunConfig};

#[derive(Parser)]
#[command(name = "copdiff", version, about = "Copula-based diffusion models: simulation, estimation and testing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file (TOML, or JSON with a .json extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for replications and bootstrap draws.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Input series; overrides the config.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Simulate a path and write `index,time,value` rows.
    Simulate,
    /// Fit a model to an observed series.
    Fit,
    /// Bootstrap pseudo-likelihood-ratio test of a parametric transform.
    LrTest,
    /// Monte Carlo bias/RMSE tables.
    McTables,
    /// Drift, diffusion and density estimates on a grid.
    ExportFunctions,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Convergence(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Convergence(_) => 4,
            CliError::Io(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Convergence(m) => write!(f, "convergence error: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl From<copula_diffusion::Error> for CliError {
    fn from(e: copula_diffusion::Error) -> Self {
        use copula_diffusion::Error as E;
        let msg = e.to_string();
        match e {
            E::Param(_) | E::Bandwidth(_) | E::NonStationary(_) | E::NotSerializable(_) => CliError::Config(msg),
            E::Data(_) | E::DegenerateSample(_) | E::Domain { .. } => CliError::Data(msg),
            E::Quadrature(_)
            | E::Convergence(_)
            | E::Derivative(_)
            | E::NonFiniteLikelihood { .. }
            | E::NonConvergence { .. }
            | E::Monotonicity(_)
            | E::SingularHessian
            | E::DomainEscape { .. } => CliError::Convergence(msg),
            E::Io(_) | E::Csv(_) | E::Json(_) => CliError::Io(msg),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (mut cfg, text) = match &cli.config {
        Some(p) => {
            let (c, t) = RunConfig::load(p)?;
            (c, Some(t))
        }
        None => (RunConfig::default(), None),
    };
    cfg.seed = cli.seed.or(cfg.seed);
    cfg.out_dir = cli.out_dir.or(cfg.out_dir);
    cfg.threads = cli.threads.or(cfg.threads);
    cfg.input = cli.input.or(cfg.input);
    cfg.validate()?;
    if let Some(t) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let echo = ConfigEcho { path: cli.config, text, effective: cfg.clone() };
    match cli.command {
        Command::Simulate => commands::simulate(&cfg, &echo),
        Command::Fit => commands::fit(&cfg, &echo),
        Command::LrTest => commands::lr_test(&cfg, &echo),
        Command::McTables => commands::mc_tables(&cfg, &echo),
        Command::ExportFunctions => commands::export_functions(&cfg, &echo),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
