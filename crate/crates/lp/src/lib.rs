//! Lyapunov–Perron construction in similarity variables.
//!
//! The perturbation `Ψ = U - Φ` solves `∂_τ Ψ = LΨ + N(Ψ+Z) + VZ`. `L` has one
//! unstable eigenvalue (the gauge mode, `λ ≈ 1`) coming from translations of the
//! blowup time. The fixed-point map
//!
//! ```text
//! K(Ψ)(τ) = S(τ)(I-P)v + ∫₀^τ S(τ-s)(I-P)F(s) ds - gauge ∫_τ^∞ e^{λ(τ-s)} PF(s) ds
//! ```
//!
//! with `F = N(Ψ+Z) + VZ` has decaying fixed points for small data; the
//! corrector coefficient `⟨v, cogauge⟩ + ∫₀^∞ e^{-λs} ⟨F, cogauge⟩ ds` measures
//! how far the candidate blowup time `T̃` is from the true one, and its root in
//! `T̃` is found by a sign-bracketed search.

mod banded;
mod fixed_point;
mod operator;
mod select;
mod trajectory;

pub use banded::{BandLu, BandMatrix};
pub use fixed_point::{corrector, lp_fixed_point, Corrector, LpSolution};
pub use operator::{deinterleave, interleave, LinearizedOperator, Spectrum, GAUGE_SHIFT};
pub use select::{
    filtered_decay, find_T_tilde, fit_exponent, reconstruct_w, write_diagnostics, DecayFit,
    Diagnostics, TTildeResult,
};
pub use trajectory::{initial_perturbation, z_trajectory, SampledTrajectory};

use corot_core::CoreError;
use corot_noise::NoiseError;
use corot_similarity::SimilarityError;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LPConfig {
    /// Ball radius for `sup_τ e^{ω̄τ}‖Ψ(τ)‖`.
    pub delta: f64,
    /// Data smallness: `‖v‖, sup‖z‖ ≤ δ/𝒞`.
    pub big_c: f64,
    /// The `T̃` bracket is `[T - δ/N, T + δ/N]`.
    pub n_bracket: f64,
    pub omega_bar: f64,
    /// Truncation of the `[0, ∞)` integrals.
    pub tau_max: f64,
    /// Stored trajectory spacing; the forcing is linear between samples.
    pub store_dtau: f64,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Root tolerance on the corrector coefficient.
    pub coef_tol: f64,
    /// Sign-bracket scan points.
    pub scan_points: usize,
    pub xi_max: f64,
    pub xi_points: usize,
    /// Regularity index `s`; bounds `ω̄ < s + 1 - n/2`.
    pub s: f64,
}

impl Default for LPConfig {
    fn default() -> Self {
        Self {
            delta: 0.5,
            big_c: 2.0,
            n_bracket: 20.0,
            omega_bar: 0.05,
            tau_max: 200.0,
            store_dtau: 0.05,
            picard_tol: 1e-10,
            picard_max_iter: 40,
            coef_tol: 1e-8,
            scan_points: 9,
            xi_max: corot_similarity::DEFAULT_XI_MAX,
            xi_points: 160,
            s: 1.6,
        }
    }
}

impl LPConfig {
    pub fn validate(&self, t_blowup: f64, n: usize) -> Result<()> {
        let bad = |m: String| Err(LpError::Config(m));
        if !(self.delta > 0.0 && self.big_c > 0.0 && self.n_bracket > 0.0) {
            return bad("delta, big_C and N must be positive".into());
        }
        if self.delta / self.n_bracket > t_blowup / 2.0 {
            return bad(format!(
                "bracket half-width delta/N = {} exceeds T/2 = {}",
                self.delta / self.n_bracket,
                t_blowup / 2.0
            ));
        }
        let window = self.s + 1.0 - n as f64 / 2.0;
        if !(self.omega_bar > 0.0 && self.omega_bar < window) {
            return bad(format!(
                "omega_bar = {} outside (0, {window})",
                self.omega_bar
            ));
        }
        if self.tau_max < 10.0 / self.omega_bar {
            return bad(format!(
                "tau_max = {} < 10/omega_bar = {}",
                self.tau_max,
                10.0 / self.omega_bar
            ));
        }
        if !(self.store_dtau > 0.0 && self.tau_max / self.store_dtau >= 2.0) {
            return bad("store_dtau must be positive and below tau_max/2".into());
        }
        if self.picard_max_iter == 0 || !(self.picard_tol > 0.0 && self.coef_tol > 0.0) {
            return bad("tolerances and picard_max_iter must be positive".into());
        }
        if self.scan_points < 2 {
            return bad("scan needs at least 2 points".into());
        }
        Ok(())
    }

    /// `[T - δ/N, T + δ/N]`.
    pub fn bracket(&self, t_blowup: f64) -> (f64, f64) {
        let w = self.delta / self.n_bracket;
        (t_blowup - w, t_blowup + w)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LpError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error("invalid LP configuration: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("eigenpair computation failed: {0}")]
    Eigen(String),
    #[error("{what} has norm {norm:e} > delta/C = {bound:e}")]
    Smallness {
        what: &'static str,
        norm: f64,
        bound: f64,
    },
    #[error("Picard iteration does not contract; factors {factors:?}")]
    NonContraction { factors: Vec<f64> },
    #[error("iteration became non-finite")]
    Divergence,
    #[error("no sign change of the corrector coefficient over the bracket; scan {scan:?}")]
    Bracket { scan: Vec<(f64, f64)> },
    #[error("diagnostics output failed: {0}")]
    Output(String),
}

pub type Result<T> = std::result::Result<T, LpError>;
