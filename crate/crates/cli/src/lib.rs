//! Command-line surface: one TOML config plus flag overrides per experiment.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{parse_data, RunConfig, CONFIG_HELP};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("io: {0}")]
    Io(String),
    /// A threshold check did not pass; the report was still written.
    #[error("check failed: {0}")]
    Failure(String),
    #[error("{0}")]
    Module(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Failure(_) | Self::Module(_) => 1,
            Self::Usage(_) => 2,
            Self::Io(_) => 3,
        }
    }
}

macro_rules! module_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Self::Module(e.to_string())
            }
        }
    )*};
}

module_errors!(
    corot_core::CoreError,
    corot_noise::NoiseError,
    corot_solver::SolverError,
    corot_lp::LpError,
    corot_control::ControlError
);

impl From<corot_ensemble::EnsembleError> for CliError {
    fn from(e: corot_ensemble::EnsembleError) -> Self {
        match e {
            corot_ensemble::EnsembleError::Config(m) => Self::Usage(m),
            corot_ensemble::EnsembleError::Io(m) => Self::Io(m),
            e => Self::Module(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "corot", version, about = "Stochastic corotational wave maps: blowup experiments", after_long_help = CONFIG_HELP)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML configuration file (see --help for every key)
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. --set grid.n_points=512 (repeatable; wins over the file)
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Residual of the self-similar solution and of the gauge eigenpair; exit 1 above threshold
    ProfileCheck {
        /// Bound on the max-norm residual of u_T with the fourth-order Laplacian
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        /// Bound on the gauge eigenpair residual
        #[arg(long, default_value_t = 1e-3)]
        gauge_tol: f64,
    },
    /// One path with snapshots: writes trajectory.csv and report.json
    Simulate {
        /// Initial data selector
        #[arg(long, default_value = "self-similar:1")]
        data: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Steps between stored snapshots (0 picks about 100 snapshots)
        #[arg(long, default_value_t = 0)]
        stride: usize,
    },
    /// Monte Carlo ensemble: records.csv, manifest.json and a summary on stdout
    Ensemble {
        #[arg(long, default_value = "perturbed:1:1e-3")]
        data: String,
        #[arg(long)]
        out: PathBuf,
        /// Write wall_ms = 0 so outputs are byte-identical across runs
        #[arg(long)]
        no_timing: bool,
        #[arg(long)]
        threads: Option<usize>,
        /// Comma-separated noise amplitudes; one ensemble per value
        #[arg(long, value_delimiter = ',')]
        sweep: Option<Vec<f64>>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Blowup time and fixed point of the perturbation in similarity variables
    LpSolve {
        #[arg(long, default_value = "self-similar:1")]
        data: String,
        /// Reference blowup time T (defaults to the T of self-similar data, else 1)
        #[arg(long)]
        t_blowup: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Steer --data to --target over [0, T1] and verify with the split solver
    Steer {
        #[arg(long, default_value = "zero")]
        data: String,
        #[arg(long)]
        target: String,
        /// Bound on the endpoint error sup|w(T1)+z(T1)-u1|
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Unstable eigenpair of the linearized operator and projection check
    Spectrum {
        /// Nodes of the similarity grid
        #[arg(long, default_value_t = 1024)]
        xi_points: usize,
        /// Bound on the eigenpair residual
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
    },
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = RunConfig::load_with(cli.common.config.as_deref(), &cli.common.overrides)?;
    let stdout = std::io::stdout();
    commands::dispatch(&cfg, &cli.command, &mut stdout.lock())
}
