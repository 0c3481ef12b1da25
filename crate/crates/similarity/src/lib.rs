//! Similarity variables `τ = log(T̃/(T̃-t))`, `ξ = r/(T̃-t)` around a candidate
//! blowup time `T̃`.
//!
//! In these variables the self-similar solution is the static profile
//! `(Φ, Φ̂)` and the equation becomes `∂_τ U = L₀U + n(U)` with
//!
//! ```text
//! L₀ = [ -1 - ξ∂_ξ        1          ]
//!      [  Δ             -2 - ξ∂_ξ    ]
//! ```
//!
//! Both characteristic speeds `ξ ± 1` point outward for `ξ ≥ 1`, so the
//! truncated domain `[0, ξ_max]` needs no boundary condition.

mod discrepancy;
mod evolve;
mod fit;
mod frame;

pub use discrepancy::{psi_discrepancy, Discrepancy, DiscrepancyProbe};
pub use evolve::{rk4_step, Dynamics, EvolveOptions, Evolver, Trajectory};
pub use fit::{estimate_T_tilde, FitOptions, TTildeEstimate};
pub use frame::{from_similarity, to_similarity, SimilarityFrame};

use corot_core::CoreError;

pub const DEFAULT_XI_MAX: f64 = 2.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimilarityError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("evolution diverged at tau = {tau}")]
    Divergence { tau: f64 },
    #[error("blowup-time fit rejected: {0}")]
    FitRejected(String),
    #[error("csv output failed: {0}")]
    Output(String),
}

pub type Result<T> = std::result::Result<T, SimilarityError>;
