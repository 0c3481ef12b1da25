use corot_core::{ModalBasis, RadialGrid};
use corot_physics::{gamma_over_cube, sinc};
use nalgebra::DMatrix;

use crate::NoiseError;

/// Spectral power-law covariance `σ_k = c (1+λ_k)^{-β/2}` on the first `modes`
/// eigenfunctions of `-Δ_h`.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    pub c: f64,
    pub beta: f64,
    pub sigmas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub omegas: Vec<f64>,
    /// `N × M`, column `k` is mode `k` on the grid.
    pub shapes: DMatrix<f64>,
    pub grid: RadialGrid,
}

impl NoiseModel {
    pub fn new(basis: &ModalBasis, c: f64, beta: f64, modes: usize) -> Result<Self, NoiseError> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(NoiseError::Domain(format!(
                "amplitude must be >= 0, got {c}"
            )));
        }
        if !(beta > 0.0) {
            return Err(NoiseError::Domain(format!(
                "decay must be positive, got {beta}"
            )));
        }
        let m = modes.min(basis.len());
        let sigmas = basis.eigenvalues[..m]
            .iter()
            .map(|l| c * (1.0 + l).powf(-beta / 2.0))
            .collect();
        Self::with_sigmas(basis, sigmas, c, beta)
    }

    /// Arbitrary per-mode standard deviations on the leading modes.
    pub fn with_sigmas(
        basis: &ModalBasis,
        sigmas: Vec<f64>,
        c: f64,
        beta: f64,
    ) -> Result<Self, NoiseError> {
        let m = sigmas.len();
        if m > basis.len() {
            return Err(NoiseError::Domain(format!(
                "{m} noise modes requested, basis has {}",
                basis.len()
            )));
        }
        if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(NoiseError::Domain(
                "standard deviations must be finite and >= 0".into(),
            ));
        }
        let lambdas = basis.eigenvalues[..m].to_vec();
        let omegas = lambdas.iter().map(|l| l.sqrt()).collect();
        let shapes = basis.eigenvectors.columns(0, m).into_owned();
        Ok(Self {
            c,
            beta,
            sigmas,
            lambdas,
            omegas,
            shapes,
            grid: basis.grid.clone(),
        })
    }

    pub fn modes(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_off(&self) -> bool {
        self.sigmas.iter().all(|s| *s == 0.0)
    }

    /// Every resolved direction carries variance.
    pub fn is_nondegenerate(&self) -> bool {
        self.sigmas.iter().all(|s| *s > 0.0)
    }

    /// `Σ_k σ_k² (1+λ_k)^p`.
    pub fn weighted_trace(&self, p: f64) -> f64 {
        self.sigmas
            .iter()
            .zip(&self.lambdas)
            .map(|(s, l)| s * s * (1.0 + l).powf(p))
            .sum()
    }

    /// With `λ_m ~ m²` the continuum sum `Σ (1+λ)^{p-β}` converges iff
    /// `β > p + 1/2`; `p = k + (n+1)/2`.
    pub fn check_regularity(&self, k: u32, n: usize) -> Result<f64, NoiseError> {
        let p = k as f64 + (n as f64 + 1.0) / 2.0;
        if self.beta <= p + 0.5 {
            return Err(NoiseError::Domain(format!(
                "beta = {} too small: need beta > {} for a trace-class covariance in H^{p}",
                self.beta,
                p + 0.5
            )));
        }
        Ok(self.weighted_trace(p))
    }

    /// Default decay `β = k + (n+1)/2 + 2`.
    pub fn default_beta(k: u32, n: usize) -> f64 {
        k as f64 + (n as f64 + 1.0) / 2.0 + 2.0
    }

    /// Physical field `Σ_k a_k e_k` from the first `a.len()` modal coefficients.
    pub fn synthesize_into(&self, a: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (k, &ak) in a.iter().enumerate() {
            if ak == 0.0 {
                continue;
            }
            for (o, e) in out.iter_mut().zip(self.shapes.column(k).iter()) {
                *o += ak * e;
            }
        }
    }

    pub fn synthesize(&self, a: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.n_points];
        self.synthesize_into(a, &mut out);
        out
    }
}

/// Covariance of `(ΔB, ζ_z, ζ_ẑ)` for one step of a unit-σ oscillator with
/// frequency `omega`: the Brownian increment and the two innovations of
/// `(z, ẑ)`. Symmetric 3×3, row-major.
pub fn step_covariance(omega: f64, dt: f64) -> [[f64; 3]; 3] {
    let y = omega * dt;
    let vbb = dt;
    let vbz = 0.5 * dt * dt * sinc(0.5 * y).powi(2);
    let vbv = dt * sinc(y);
    let vzz = 0.25 * dt.powi(3) * gamma_over_cube(y);
    let vzv = 0.5 * dt * dt * sinc(y).powi(2);
    let vvv = 0.5 * dt * (1.0 + sinc(2.0 * y));
    [[vbb, vbz, vbv], [vbz, vzz, vzv], [vbv, vzv, vvv]]
}

/// `(Var z_k, Var ẑ_k, Cov(z_k, ẑ_k))` at time `t` from zero data.
pub fn mode_variance(model: &NoiseModel, k: usize, t: f64) -> Result<(f64, f64, f64), NoiseError> {
    if k >= model.modes() {
        return Err(NoiseError::Domain(format!(
            "mode {k} is not driven ({} modes)",
            model.modes()
        )));
    }
    if !(t >= 0.0) {
        return Err(NoiseError::Domain(format!("time must be >= 0, got {t}")));
    }
    let c = step_covariance(model.omegas[k], t);
    let s2 = model.sigmas[k] * model.sigmas[k];
    Ok((s2 * c[1][1], s2 * c[2][2], s2 * c[1][2]))
}

/// Lower Cholesky factor; pivots that vanish to round-off are clamped to zero
/// (the covariance is nearly singular when `ω dt ≪ 1`).
pub(crate) fn cholesky3(a: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    // scale to unit diagonal so the clamp tolerance is relative
    let d: Vec<f64> = (0..3).map(|i| a[i][i].max(0.0).sqrt()).collect();
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = if d[i] > 0.0 && d[j] > 0.0 {
                a[i][j] / (d[i] * d[j])
            } else {
                0.0
            };
        }
    }
    let mut l = [[0.0; 3]; 3];
    for j in 0..3 {
        let mut p = c[j][j];
        for k in 0..j {
            p -= l[j][k] * l[j][k];
        }
        if p <= 1e-14 {
            continue;
        }
        let ljj = p.sqrt();
        l[j][j] = ljj;
        for i in j + 1..3 {
            let mut s = c[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = s / ljj;
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            l[i][j] *= d[i];
        }
    }
    l
}
