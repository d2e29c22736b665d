//! `wate`: estimate weighted average treatment effects from a CSV, run
//! simulation cells, and tabulate super-population truths.

mod config;
mod estimate;
mod output;
mod simulate;
mod truth;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use wate_core::WateError;

pub const TOOL: &str = "wate";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "wate", version, about = "Augmented WATE estimation with sandwich, bootstrap and wild-bootstrap variances")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analyse a CSV dataset.
    Estimate(EstimateArgs),
    /// Run one Monte Carlo cell of the simulation study.
    Simulate(SimulateArgs),
    /// Tabulate true (and optionally pseudo-true) WATEs for simulation models.
    Truth(TruthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads. Results do not depend on this.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VarianceArgs {
    /// Comma-separated estimands: ate, att, atc, ato, atm, aten, trim:<alpha>.
    #[arg(long, value_delimiter = ',', default_value = "ate,att,ato,atm,aten")]
    pub estimands: Vec<String>,
    /// Comma-separated methods: boot1, boot2, wbexp1, wbrad1, wbexp2, wbrad2,
    /// sand, or `wb` for the wild bootstrap chosen by --perturbation and
    /// --if-variant.
    #[arg(long, value_delimiter = ',', default_value = "boot1,boot2,wbexp1,wbrad1,wbexp2,wbrad2,sand")]
    pub methods: Vec<String>,
    /// Bootstrap and wild-bootstrap replicates.
    #[arg(long, default_value_t = 200)]
    pub replicates: usize,
    /// Wald intervals have level 1 - alpha.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Scale estimator for resampled estimates: sd or iqr.
    #[arg(long, default_value = "sd")]
    pub scale: String,
    /// Multiplier distribution for bare `wb`: exp1 or rademacher.
    #[arg(long, default_value = "exp1")]
    pub perturbation: String,
    /// Influence function for bare `wb`: if1 or if2.
    #[arg(long, default_value = "if2")]
    pub if_variant: String,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "z")]
    pub treatment_col: String,
    #[arg(long, default_value = "y")]
    pub outcome_col: String,
    /// Propensity-model covariates; all covariates when absent.
    #[arg(long, value_delimiter = ',')]
    pub ps_covariates: Option<Vec<String>>,
    /// Outcome-model covariates; all covariates when absent.
    #[arg(long, value_delimiter = ',')]
    pub or_covariates: Option<Vec<String>>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub variance: VarianceArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Data-generating model, 1 to 5.
    #[arg(long, default_value_t = 2)]
    pub model: u8,
    /// Sample size; the model's default when absent.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value = "heterogeneous")]
    pub effect: String,
    /// Working-model scenario: A1 (both correct) to A4 (both misspecified).
    #[arg(long, default_value = "A1")]
    pub scenario: String,
    /// Monte Carlo replicates.
    #[arg(long, default_value_t = 500)]
    pub mc_reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub variance: VarianceArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct TruthArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    pub model: Vec<u8>,
    #[arg(long, value_delimiter = ',', default_value = "heterogeneous,homogeneous")]
    pub effect: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "ate,att,ato,atm,aten")]
    pub estimands: Vec<String>,
    /// Also report pseudo-true values under these working-model scenarios.
    #[arg(long, value_delimiter = ',')]
    pub scenario: Vec<String>,
    /// Super-population size.
    #[arg(long, default_value_t = wate_core::simulation::N_SUPER)]
    pub n_super: usize,
    #[arg(long, default_value_t = wate_core::simulation::TRUTH_SEED)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Failure classes with distinct exit codes.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Run(anyhow::Error),
}

impl From<WateError> for CliError {
    fn from(e: WateError) -> Self {
        match e {
            WateError::ConfigError(msg) => CliError::Config(msg),
            WateError::UnknownCovariate(_) | WateError::MissingColumn { .. } => CliError::Config(e.to_string()),
            other => CliError::Run(other.into()),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Run(e)
    }
}

fn install_thread_pool(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Run(e.into()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Estimate(args) => {
            let cfg = config::EstimateConfig::resolve(&args)?;
            install_thread_pool(args.output.threads)?;
            let bytes = estimate::run(&cfg)?;
            output::emit(args.output.out.as_deref(), &bytes)
        }
        Command::Simulate(args) => {
            let cfg = config::SimulateConfig::resolve(&args)?;
            install_thread_pool(args.output.threads)?;
            let bytes = simulate::run(&cfg)?;
            output::emit(args.output.out.as_deref(), &bytes)
        }
        Command::Truth(args) => {
            let cfg = config::TruthConfig::resolve(&args)?;
            install_thread_pool(args.output.threads)?;
            let bytes = truth::run(&cfg)?;
            output::emit(args.output.out.as_deref(), &bytes)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("wate: configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Run(e)) => {
            eprintln!("wate: {e:#}");
            ExitCode::from(1)
        }
    }
}
