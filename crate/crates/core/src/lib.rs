//! Substrate for radial wave problems in `n` space dimensions.
//!
//! Fields are sampled on a cell-centered grid `r_j = (j + 1/2) h`, so no node
//! sits on the origin. Radial regularity is encoded by even reflection.

mod energy;
mod error;
mod grid;
mod lift;
mod modal;

pub use energy::{energy, energy_with, EnergyKind};
pub use error::CoreError;
pub use grid::{
    extend, laplacian_apply, laplacian_apply_high_order, sample_cubic, sample_cubic_many, Closure,
    ConservativeLaplacian, RadialGrid, StatePair,
};
pub use lift::corotational_lift;
pub use modal::{
    heat_semigroup_apply, helmholtz_solve, modal_decompose, sobolev_norm, ModalBasis, SobolevNorm,
    SobolevOrder,
};

pub type Result<T> = std::result::Result<T, CoreError>;
