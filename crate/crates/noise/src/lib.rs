//! Additive noise `dW = Σ_k σ_k e_k dβ_k` on the leading modes of the discrete
//! Laplacian, and the stochastic convolution `z(t) = ∫₀ᵗ T(t-s) (0, dW_s)`.
//!
//! Each mode is a driven harmonic oscillator with frequency `ω_k = √λ_k`; a step
//! of length `dt` is sampled exactly as a joint Gaussian of the Brownian
//! increment and the two oscillator innovations, so the velocity kick used by
//! the direct solver and the convolution used by the split solver come from the
//! same Brownian path.

mod model;
mod path;

pub use model::{mode_variance, step_covariance, NoiseModel};
pub use path::{path_seed, read_path, sample_convolution, write_path, NoisePath};

#[derive(Debug, thiserror::Error)]
pub enum NoiseError {
    #[error(transparent)]
    Core(#[from] corot_core::CoreError),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed noise dump: {0}")]
    Format(String),
}
