//! Monte Carlo ensembles of the stochastic solver: blowup fraction before a
//! horizon, `T̂` distribution and profile discrepancy over noise realizations.

mod config;
mod run;
mod stats;

pub use config::{EnsembleConfig, InitialData, NoiseSpec};
pub use run::{
    amplitude_sweep, basis_checksum, grid_checksum, is_decreasing, run_ensemble, run_prepared,
    EnsembleStats, Outcome, PathRecord, Prepared, RunOptions, SweepRow, MANIFEST_FILE,
    PARTIAL_FILE, RECORDS_FILE,
};
pub use stats::{wilson_interval, DiscrepancySummary, Histogram, Z95};

use corot_core::CoreError;
use corot_noise::NoiseError;
use corot_solver::SolverError;

#[derive(Debug, thiserror::Error)]
pub enum EnsembleError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("invalid ensemble configuration: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, EnsembleError>;
