use corot_core::{sample_cubic_many, Closure, RadialGrid, StatePair};

use crate::{Result, SimilarityError};

/// Similarity coordinates around the candidate blowup time `t_tilde`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityFrame {
    pub t_tilde: f64,
    pub xi_grid: RadialGrid,
}

impl SimilarityFrame {
    pub fn new(t_tilde: f64, xi_grid: RadialGrid) -> Result<Self> {
        if !(t_tilde > 0.0 && t_tilde.is_finite()) {
            return Err(SimilarityError::Domain(format!(
                "T~ must be positive, got {t_tilde}"
            )));
        }
        if xi_grid.r_max <= 1.0 {
            return Err(SimilarityError::Domain(format!(
                "xi_max = {} must exceed 1 for outflow at the edge",
                xi_grid.r_max
            )));
        }
        Ok(Self { t_tilde, xi_grid })
    }

    pub fn tau(&self, t: f64) -> Result<f64> {
        if !(t < self.t_tilde) {
            return Err(SimilarityError::Domain(format!(
                "t = {t} is not before T~ = {}",
                self.t_tilde
            )));
        }
        Ok(-(-t / self.t_tilde).ln_1p())
    }

    pub fn time(&self, tau: f64) -> f64 {
        -self.t_tilde * (-tau).exp_m1()
    }

    /// `T̃ - t` at similarity time `tau`.
    pub fn scale(&self, tau: f64) -> f64 {
        self.t_tilde * (-tau).exp()
    }
}

/// `(U, Û)(ξ) = ((T̃-t) u, (T̃-t)² û)(ξ (T̃-t))`, cubic interpolation of the
/// physical samples.
pub fn to_similarity(
    state: &StatePair,
    phys: &RadialGrid,
    t: f64,
    frame: &SimilarityFrame,
) -> Result<StatePair> {
    let s = frame.t_tilde - t;
    if !(s > 0.0) {
        return Err(SimilarityError::Domain(format!(
            "t = {t} is not before T~ = {}",
            frame.t_tilde
        )));
    }
    let reach = frame.xi_grid.r_max * s;
    if reach > phys.r_max * (1.0 + 1e-12) {
        return Err(SimilarityError::Domain(format!(
            "physical data ends at r = {}, radius {reach} is needed",
            phys.r_max
        )));
    }
    let radii: Vec<f64> = frame.xi_grid.nodes.iter().map(|x| x * s).collect();
    let u = sample_cubic_many(&state.u, phys, Closure::Dirichlet, &radii)?;
    let v = sample_cubic_many(&state.u_hat, phys, Closure::Dirichlet, &radii)?;
    Ok(StatePair {
        u: u.into_iter().map(|a| a * s).collect(),
        u_hat: v.into_iter().map(|a| a * s * s).collect(),
    })
}

/// Inverse of [`to_similarity`] onto a physical grid inside `r ≤ ξ_max (T̃-t)`.
pub fn from_similarity(
    sim: &StatePair,
    frame: &SimilarityFrame,
    tau: f64,
    phys: &RadialGrid,
) -> Result<StatePair> {
    let s = frame.scale(tau);
    let reach = frame.xi_grid.r_max * s;
    if phys.r_max > reach * (1.0 + 1e-12) {
        return Err(SimilarityError::Domain(format!(
            "similarity data covers r <= {reach}, radius {} is needed",
            phys.r_max
        )));
    }
    let xis: Vec<f64> = phys.nodes.iter().map(|r| r / s).collect();
    let u = sample_cubic_many(&sim.u, &frame.xi_grid, Closure::Extrapolate, &xis)?;
    let v = sample_cubic_many(&sim.u_hat, &frame.xi_grid, Closure::Extrapolate, &xis)?;
    Ok(StatePair {
        u: u.into_iter().map(|a| a / s).collect(),
        u_hat: v.into_iter().map(|a| a / (s * s)).collect(),
    })
}
