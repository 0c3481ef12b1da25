use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::grid::fv_coefficients;
use crate::{CoreError, RadialGrid, Result, StatePair};

pub const MAX_MODAL_POINTS: usize = 4096;

/// Eigen-decomposition of `-Δ_h` (the conservative stencil of
/// [`crate::laplacian_apply`]). Eigenvectors are orthonormal in the weighted
/// product `Σ_j w_j f_j g_j` with the weights of [`RadialGrid::weights`].
#[derive(Debug, Clone)]
pub struct ModalBasis {
    pub n: usize,
    pub grid: RadialGrid,
    /// Ascending, clamped at zero.
    pub eigenvalues: Vec<f64>,
    /// Column `k` is mode `k` sampled on the grid.
    pub eigenvectors: DMatrix<f64>,
    pub weights: Vec<f64>,
}

impl ModalBasis {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn mode(&self, k: usize) -> Vec<f64> {
        self.eigenvectors.column(k).iter().copied().collect()
    }

    pub fn frequency(&self, k: usize) -> f64 {
        self.eigenvalues[k].sqrt()
    }

    /// Coefficients `⟨f, e_k⟩_w`.
    pub fn project(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.grid.check(f)?;
        let wf = DVector::from_iterator(f.len(), f.iter().zip(&self.weights).map(|(a, w)| a * w));
        Ok(self.eigenvectors.tr_mul(&wf).iter().copied().collect())
    }

    /// Coefficients of the first `m` modes only.
    pub fn project_leading(&self, f: &[f64], m: usize) -> Result<Vec<f64>> {
        self.grid.check(f)?;
        let m = m.min(self.len());
        Ok((0..m)
            .map(|k| {
                self.eigenvectors
                    .column(k)
                    .iter()
                    .zip(f)
                    .zip(&self.weights)
                    .map(|((e, a), w)| e * a * w)
                    .sum()
            })
            .collect())
    }

    /// `Σ_k a_k e_k`; `a` may be shorter than the basis (leading modes).
    pub fn synthesize(&self, a: &[f64]) -> Result<Vec<f64>> {
        if a.len() > self.len() {
            return Err(CoreError::Shape {
                expected: self.len(),
                got: a.len(),
            });
        }
        let mut out = vec![0.0; self.grid.n_points];
        for (k, &ak) in a.iter().enumerate() {
            if ak == 0.0 {
                continue;
            }
            for (o, e) in out.iter_mut().zip(self.eigenvectors.column(k).iter()) {
                *o += ak * e;
            }
        }
        Ok(out)
    }

    /// Applies `m(λ_k)` mode by mode.
    pub fn apply_multiplier<F: Fn(f64) -> f64>(&self, f: &[f64], m: F) -> Result<Vec<f64>> {
        let mut a = self.project(f)?;
        for (ak, &l) in a.iter_mut().zip(&self.eigenvalues) {
            *ak *= m(l);
        }
        self.synthesize(&a)
    }
}

pub fn modal_decompose(grid: &RadialGrid, n: usize) -> Result<ModalBasis> {
    if n < 5 {
        return Err(CoreError::Dimension(n));
    }
    let m = grid.n_points;
    if m > MAX_MODAL_POINTS {
        return Err(CoreError::Grid(format!(
            "{m} nodes exceed the dense eigensolve budget of {MAX_MODAL_POINTS}"
        )));
    }
    let (c, vol) = fv_coefficients(grid, n);
    let sq: Vec<f64> = vol.iter().map(|v| v.sqrt()).collect();
    // W^{-1/2} (W (-Δ_h)) W^{-1/2}, symmetric tridiagonal
    let mut s = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        s[(j, j)] = (c[j] + c[j + 1]) / vol[j];
        if j + 1 < m {
            let off = -c[j + 1] / (sq[j] * sq[j + 1]);
            s[(j, j + 1)] = off;
            s[(j + 1, j)] = off;
        }
    }
    let condition = {
        let d: Vec<f64> = (0..m).map(|j| s[(j, j)]).collect();
        let hi = d.iter().cloned().fold(0.0, f64::max);
        let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
        hi / lo
    };
    let eig = SymmetricEigen::try_new(s, 1e-15, 10_000).ok_or_else(|| CoreError::Eigen {
        reason: "symmetric QR iteration did not converge".into(),
        condition,
    })?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::Eigen {
            reason: "non-finite eigenvalue".into(),
            condition,
        });
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
    let mut vecs = DMatrix::<f64>::zeros(m, m);
    for (col, &k) in order.iter().enumerate() {
        // fix the sign so that modes are positive near the origin
        let sign = if eig.eigenvectors[(0, k)] < 0.0 {
            -1.0
        } else {
            1.0
        };
        for j in 0..m {
            vecs[(j, col)] = sign * eig.eigenvectors[(j, k)] / sq[j];
        }
    }
    Ok(ModalBasis {
        n,
        grid: grid.clone(),
        eigenvalues,
        eigenvectors: vecs,
        weights: vol,
    })
}

/// Sobolev orders `(s, k)` of the space `Ḣ^s ∩ Ḣ^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevOrder {
    pub s: f64,
    pub k: u32,
    /// Skip the admissibility window check.
    pub diagnostic: bool,
}

impl SobolevOrder {
    /// Validated against `n/2 - 1 < s < n/2 - 1 + 1/(2n-4)`, `k > n`.
    pub fn new(s: f64, k: u32, n: usize) -> Result<Self> {
        let o = Self {
            s,
            k,
            diagnostic: false,
        };
        o.validate(n)?;
        Ok(o)
    }

    pub fn diagnostic(s: f64, k: u32) -> Self {
        Self {
            s,
            k,
            diagnostic: true,
        }
    }

    pub fn window(n: usize) -> (f64, f64) {
        let nf = n as f64;
        (nf / 2.0 - 1.0, nf / 2.0 - 1.0 + 1.0 / (2.0 * nf - 4.0))
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let (lo, hi) = Self::window(n);
        if !(self.s > lo && self.s < hi) {
            return Err(CoreError::Config(format!(
                "s = {} outside the admissible window ({lo}, {hi}) for n = {n}",
                self.s
            )));
        }
        if (self.k as usize) <= n {
            return Err(CoreError::Config(format!(
                "k = {} must exceed n = {n}",
                self.k
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevNorm {
    /// `(Σ (λ^s + λ^k) a_k²)^{1/2}` of the field.
    pub field: f64,
    /// Same with orders `(s-1, k-1)` for the velocity.
    pub velocity: f64,
    pub total: f64,
}

pub fn sobolev_norm(
    state: &StatePair,
    order: SobolevOrder,
    basis: &ModalBasis,
) -> Result<SobolevNorm> {
    if !order.diagnostic {
        order.validate(basis.n)?;
    }
    let a = basis.project(&state.u)?;
    let b = basis.project(&state.u_hat)?;
    let k = order.k as i32;
    let mut fu = 0.0;
    let mut fv = 0.0;
    for ((&l, ak), bk) in basis.eigenvalues.iter().zip(&a).zip(&b) {
        let l = l.max(0.0);
        fu += (l.powf(order.s) + l.powi(k)) * ak * ak;
        fv += (l.powf(order.s - 1.0) + l.powi(k - 1)) * bk * bk;
    }
    Ok(SobolevNorm {
        field: fu.sqrt(),
        velocity: fv.sqrt(),
        total: (fu + fv).sqrt(),
    })
}

/// `(I - Δ_h)^{-p} f` for `p ∈ {1, 2}`.
pub fn helmholtz_solve(f: &[f64], basis: &ModalBasis, p: u32) -> Result<Vec<f64>> {
    if !(p == 1 || p == 2) {
        return Err(CoreError::Domain(format!(
            "resolvent power must be 1 or 2, got {p}"
        )));
    }
    basis.apply_multiplier(f, |l| (1.0 + l).powi(-(p as i32)))
}

/// `e^{t(Δ_h - I)} f`.
pub fn heat_semigroup_apply(f: &[f64], basis: &ModalBasis, t: f64) -> Result<Vec<f64>> {
    if !(t >= 0.0) {
        return Err(CoreError::Domain(format!(
            "heat semigroup needs t >= 0, got {t}"
        )));
    }
    basis.apply_multiplier(f, |l| (-t * (1.0 + l)).exp())
}
