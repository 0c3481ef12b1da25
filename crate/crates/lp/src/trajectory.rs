use corot_core::{sample_cubic_many, Closure, RadialGrid, StatePair};
use corot_noise::{NoiseModel, NoisePath};
use corot_profiles::profile_state;
use corot_similarity::SimilarityFrame;

use crate::{LpError, Result};

/// States at `τ = i · dtau`, `i = 0..states.len()`, linear in between.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTrajectory {
    pub dtau: f64,
    pub states: Vec<StatePair>,
}

impl SampledTrajectory {
    pub fn zeros(len: usize, dtau: f64, samples: usize) -> Self {
        Self {
            dtau,
            states: vec![StatePair::zeros(len); samples],
        }
    }

    /// `n` samples covering `[0, tau_max]` at spacing `dtau`.
    pub fn sample_count(tau_max: f64, dtau: f64) -> usize {
        (tau_max / dtau).round() as usize + 1
    }

    pub fn tau_max(&self) -> f64 {
        (self.states.len() - 1) as f64 * self.dtau
    }

    pub fn taus(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.states.len()).map(|i| i as f64 * self.dtau)
    }

    pub fn at(&self, tau: f64) -> Result<StatePair> {
        let p = tau / self.dtau;
        let last = self.states.len() - 1;
        if !(p >= -1e-9 && p <= last as f64 + 1e-9) {
            return Err(LpError::Domain(format!(
                "tau = {tau} outside the stored range [0, {}]",
                self.tau_max()
            )));
        }
        let i = (p.floor().max(0.0) as usize).min(last.saturating_sub(1));
        let s = (p - i as f64).clamp(0.0, 1.0);
        if last == 0 {
            return Ok(self.states[0].clone());
        }
        Ok(self.states[i].scale(1.0 - s).axpy(s, &self.states[i + 1]))
    }

    /// `sup_τ e^{ωτ} ‖X(τ)‖∞` over the stored samples.
    pub fn weighted_norm(&self, omega: f64) -> f64 {
        self.taus()
            .zip(&self.states)
            .map(|(t, s)| (omega * t).exp() * s.sup_norm())
            .fold(0.0, f64::max)
    }
}

/// `Ψ₀ = (T̃ u₀(T̃ξ) - Φ, T̃² û₀(T̃ξ) - Φ̂)` on the similarity grid.
pub fn initial_perturbation(
    u0: &StatePair,
    phys: &RadialGrid,
    t_tilde: f64,
    t_blowup: f64,
    xi_grid: &RadialGrid,
    d: usize,
) -> Result<StatePair> {
    if !(t_tilde > 0.0 && t_tilde <= 2.0 * t_blowup) {
        return Err(LpError::Domain(format!(
            "T~ = {t_tilde} outside (0, 2T] with T = {t_blowup}"
        )));
    }
    let reach = xi_grid.r_max * t_tilde;
    if reach > phys.r_max * (1.0 + 1e-12) {
        return Err(LpError::Domain(format!(
            "data ends at r = {}, radius {reach} is needed",
            phys.r_max
        )));
    }
    let radii: Vec<f64> = xi_grid.nodes.iter().map(|x| x * t_tilde).collect();
    let a = sample_cubic_many(&u0.u, phys, Closure::Extrapolate, &radii)?;
    let b = sample_cubic_many(&u0.u_hat, phys, Closure::Extrapolate, &radii)?;
    let prof = profile_state(xi_grid, d)?;
    Ok(StatePair {
        u: a.iter()
            .zip(&prof.u)
            .map(|(x, p)| t_tilde * x - p)
            .collect(),
        u_hat: b
            .iter()
            .zip(&prof.u_hat)
            .map(|(x, p)| t_tilde * t_tilde * x - p)
            .collect(),
    })
}

/// `Z(τ, ξ) = (s z(t, ξs), s² ẑ(t, ξs))` with `s = T̃e^{-τ}`, `t = T̃ - s`,
/// sampled at spacing `dtau` on `[0, tau_max]`.
pub fn z_trajectory(
    model: &NoiseModel,
    path: &NoisePath,
    frame: &SimilarityFrame,
    dtau: f64,
    tau_max: f64,
) -> Result<SampledTrajectory> {
    let phys = &model.grid;
    let xi = &frame.xi_grid;
    if xi.r_max * frame.t_tilde > phys.r_max * (1.0 + 1e-12) {
        return Err(LpError::Domain(format!(
            "noise grid ends at r = {}, radius {} is needed",
            phys.r_max,
            xi.r_max * frame.t_tilde
        )));
    }
    if path.t_final() < frame.t_tilde {
        return Err(LpError::Domain(format!(
            "noise path ends at t = {}, before T~ = {}",
            path.t_final(),
            frame.t_tilde
        )));
    }
    let count = SampledTrajectory::sample_count(tau_max, dtau);
    let mut states = Vec::with_capacity(count);
    let mut radii = vec![0.0; xi.n_points];
    for i in 0..count {
        let tau = i as f64 * dtau;
        let s = frame.scale(tau);
        let t = frame.time(tau).min(path.t_final());
        let field = path.field_at(model, t)?;
        radii
            .iter_mut()
            .zip(&xi.nodes)
            .for_each(|(r, x)| *r = x * s);
        let a = sample_cubic_many(&field.u, phys, Closure::Dirichlet, &radii)?;
        let b = sample_cubic_many(&field.u_hat, phys, Closure::Dirichlet, &radii)?;
        states.push(StatePair {
            u: a.into_iter().map(|v| s * v).collect(),
            u_hat: b.into_iter().map(|v| s * s * v).collect(),
        });
    }
    Ok(SampledTrajectory { dtau, states })
}
