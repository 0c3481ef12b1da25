//! Physical-variable evolution of `u_tt - Δu = n₀(u) + Ẇ` on a radial grid.
//!
//! Two modes share one leapfrog core: `Direct` steps `u` and adds the Brownian
//! kick in the second half-kick; `Dpd` steps `w = u - z` deterministically with
//! forcing `n₀(w + z)`, where `z` is the exactly sampled stochastic convolution.

mod mild;
mod solve;

pub use mild::{picard_mild_solve, MildOptions, MildSolution};
pub use solve::{
    split_norms, BlowupReport, ExitNorms, SolveOutput, Solver, Trigger, DEFAULT_AMP_FACTOR,
};

use corot_core::{CoreError, RadialGrid, SobolevOrder};
use corot_noise::NoiseError;
use corot_similarity::{FitOptions, SimilarityError};
use serde::Serialize;

/// Leapfrog stability on the conservative Laplacian: its largest eigenvalue is
/// `≈ 5.36/h²` (the half-cell at `r_max`), so `ω_max dt ≤ 2` needs `dt ≤ 0.864 h`.
pub const MAX_DT_FACTOR: f64 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    Direct,
    Dpd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub grid: RadialGrid,
    /// Target sphere dimension; the radial problem lives in `n = d + 2`.
    pub d: usize,
    /// `dt = dt_factor · h`, in `(0, MAX_DT_FACTOR]`.
    pub dt_factor: f64,
    pub mode: SolverMode,
    /// Blowup is declared when `sup |u| ≥ amp_threshold`.
    pub amp_threshold: f64,
    /// Sobolev surrogate trigger; logged, never stops the run.
    pub norm_threshold: f64,
    pub t_final: f64,
    /// Switch off `n₀` (linear wave equation).
    pub nonlinear: bool,
    pub fit: FitOptions,
    pub order: SobolevOrder,
    /// Steps between Sobolev norm evaluations (needs a basis).
    pub norm_stride: usize,
    /// Steps between stored states used for the profile discrepancy.
    pub measure_stride: usize,
    /// How many of the latest stored states are compared with the profile.
    pub measure_points: usize,
    /// Extent and resolution of the `ξ` grid used for the discrepancy.
    pub xi_max: f64,
    pub xi_points: usize,
    /// Keep every `record_stride`-th state in the output; `0` keeps none.
    pub record_stride: usize,
}

impl SolverConfig {
    /// Defaults: `dt = h/2`, direct mode, `amp_threshold = 0.4 Φ(0)/h`.
    pub fn new(grid: RadialGrid, d: usize, t_final: f64) -> Self {
        let amp = DEFAULT_AMP_FACTOR * 2.0 / ((d as f64 - 2.0).max(1.0)).sqrt() / grid.h;
        Self {
            grid,
            d,
            dt_factor: 0.5,
            mode: SolverMode::Direct,
            amp_threshold: amp,
            norm_threshold: 1e12,
            t_final,
            nonlinear: true,
            fit: FitOptions::default(),
            order: SobolevOrder::diagnostic(1.6, 6),
            norm_stride: 16,
            measure_stride: 10,
            measure_points: 3,
            xi_max: corot_similarity::DEFAULT_XI_MAX,
            xi_points: 160,
            record_stride: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.d + 2
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SolverError::Config(m));
        if self.d < 3 {
            return bad(format!("d = {} < 3", self.d));
        }
        if !(self.dt_factor > 0.0 && self.dt_factor <= MAX_DT_FACTOR) {
            return bad(format!(
                "dt_factor = {} outside (0, {MAX_DT_FACTOR}] (CFL)",
                self.dt_factor
            ));
        }
        if !(self.amp_threshold > 0.0 && self.norm_threshold > 0.0) {
            return bad("thresholds must be positive".into());
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return bad(format!("t_final = {} must be positive", self.t_final));
        }
        if self.grid.n_points < 4 {
            return bad("grid needs at least 4 nodes".into());
        }
        if self.measure_stride == 0 {
            return bad("measure_stride must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("state became non-finite at t = {t}")]
    Divergence { t: f64 },
    #[error("Picard iteration does not contract; factors {factors:?}")]
    Contraction { factors: Vec<f64> },
}

pub type Result<T> = std::result::Result<T, SolverError>;
