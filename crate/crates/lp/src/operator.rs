use corot_core::{RadialGrid, StatePair};
use corot_profiles::gauge_state;
use corot_similarity::Evolver;
use serde::Serialize;

use crate::banded::{BandLu, BandMatrix};
use crate::{LpError, Result};

/// Shift used by inverse iteration for the eigenvalue near 1.
pub const GAUGE_SHIFT: f64 = 1.01;

/// `(U_0, Û_0, U_1, Û_1, ...)`, the ordering of [`LinearizedOperator::matrix`].
pub fn interleave(x: &StatePair) -> Vec<f64> {
    x.u.iter()
        .zip(&x.u_hat)
        .flat_map(|(a, b)| [*a, *b])
        .collect()
}

pub fn deinterleave(v: &[f64]) -> StatePair {
    StatePair {
        u: v.iter().step_by(2).copied().collect(),
        u_hat: v.iter().skip(1).step_by(2).copied().collect(),
    }
}

/// Eigenvalue and residual of one inverse-iteration run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spectrum {
    pub eigenvalue: f64,
    /// `‖L x - λ x‖∞ / ‖x‖∞` for the right eigenvector.
    pub residual: f64,
    pub left_residual: f64,
    pub iterations: usize,
}

/// Discrete `L = L₀ + V` on a similarity grid with its unstable eigenpair.
///
/// `gauge` is the right eigenvector scaled to match `(g, ĝ)` in least squares
/// on the `U` component; `dual` is the left eigenvector scaled so that
/// `dual · gauge = 1`. The weighted-L² cogauge is `dual / w`.
#[derive(Debug, Clone)]
pub struct LinearizedOperator {
    pub evolver: Evolver,
    pub matrix: BandMatrix,
    /// Shell volumes of the `ξ` grid in dimension `n`.
    pub weights: Vec<f64>,
    pub spectrum: Spectrum,
    pub gauge: StatePair,
    pub cogauge: StatePair,
    dual: Vec<f64>,
    gauge_flat: Vec<f64>,
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn normalize(v: &mut [f64]) {
    let s = sup(v);
    v.iter_mut().for_each(|x| *x /= s);
}

/// Inverse iteration with a fixed shift; returns the vector and iteration count.
fn inverse_iteration(lu: &BandLu, seed: &[f64]) -> (Vec<f64>, usize) {
    let mut x = seed.to_vec();
    normalize(&mut x);
    for it in 1..=200 {
        let prev = x.clone();
        lu.solve_in_place(&mut x);
        normalize(&mut x);
        // fix the sign so consecutive iterates are comparable
        let dot: f64 = x.iter().zip(&prev).map(|(a, b)| a * b).sum();
        if dot < 0.0 {
            x.iter_mut().for_each(|v| *v = -*v);
        }
        let change = x
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if change < 1e-13 {
            return (x, it);
        }
    }
    (x, 200)
}

impl LinearizedOperator {
    pub fn new(xi_grid: RadialGrid, d: usize) -> Result<Self> {
        let evolver = Evolver::new(xi_grid, d)?;
        let m = evolver.len();
        let matrix = BandMatrix::from_columns(2 * m, |c| {
            let mut e = vec![0.0; 2 * m];
            e[c] = 1.0;
            interleave(&evolver.apply_l(&deinterleave(&e)))
        });
        let shifted = matrix.shifted(GAUGE_SHIFT);
        let lu = shifted
            .lu()
            .ok_or_else(|| LpError::Eigen("shifted operator is singular".into()))?;
        let lut = shifted
            .transpose()
            .lu()
            .ok_or_else(|| LpError::Eigen("shifted adjoint is singular".into()))?;

        let analytic = gauge_state(&evolver.grid, evolver.n);
        let (mut right, it_r) = inverse_iteration(&lu, &interleave(&analytic));
        let (mut left, it_l) = inverse_iteration(&lut, &vec![1.0; 2 * m]);

        let lx = matrix.mul(&right);
        let lambda = lx.iter().zip(&right).map(|(a, b)| a * b).sum::<f64>()
            / right.iter().map(|b| b * b).sum::<f64>();
        let res: Vec<f64> = lx.iter().zip(&right).map(|(a, b)| a - lambda * b).collect();
        let residual = sup(&res) / sup(&right);
        let ly = matrix.transpose().mul(&left);
        let lres: Vec<f64> = ly.iter().zip(&left).map(|(a, b)| a - lambda * b).collect();
        let left_residual = sup(&lres) / sup(&left);
        if !(residual < 1e-6 && left_residual < 1e-6) {
            return Err(LpError::Eigen(format!(
                "inverse iteration did not converge near 1 (residuals {residual:e}, {left_residual:e})"
            )));
        }

        // scale to the analytic U component, then the dual to unit pairing
        let gu: Vec<f64> = right.iter().step_by(2).copied().collect();
        let alpha = gu.iter().zip(&analytic.u).map(|(a, b)| a * b).sum::<f64>()
            / gu.iter().map(|a| a * a).sum::<f64>();
        right.iter_mut().for_each(|v| *v *= alpha);
        let pair: f64 = left.iter().zip(&right).map(|(a, b)| a * b).sum();
        left.iter_mut().for_each(|v| *v /= pair);

        let weights = evolver.grid.weights(evolver.n);
        let dual_pair = deinterleave(&left);
        let cogauge = StatePair {
            u: dual_pair
                .u
                .iter()
                .zip(&weights)
                .map(|(y, w)| y / w)
                .collect(),
            u_hat: dual_pair
                .u_hat
                .iter()
                .zip(&weights)
                .map(|(y, w)| y / w)
                .collect(),
        };
        Ok(Self {
            gauge: deinterleave(&right),
            gauge_flat: right,
            cogauge,
            dual: left,
            weights,
            spectrum: Spectrum {
                eigenvalue: lambda,
                residual,
                left_residual,
                iterations: it_r.max(it_l),
            },
            matrix,
            evolver,
        })
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.evolver.grid
    }

    pub fn eigenvalue(&self) -> f64 {
        self.spectrum.eigenvalue
    }

    /// `⟨f, g⟩_w = Σ w_j (f_j g_j + f̂_j ĝ_j)`.
    pub fn pairing(&self, f: &StatePair, g: &StatePair) -> f64 {
        let mut s = 0.0;
        for j in 0..self.weights.len() {
            s += self.weights[j] * (f.u[j] * g.u[j] + f.u_hat[j] * g.u_hat[j]);
        }
        s
    }

    /// Gauge coefficient `⟨f, cogauge⟩_w`, so that `P f = coefficient · gauge`.
    pub fn coefficient(&self, f: &StatePair) -> f64 {
        self.pairing(f, &self.cogauge)
    }

    pub(crate) fn coefficient_flat(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.dual).map(|(a, b)| a * b).sum()
    }

    pub fn gauge_flat(&self) -> &[f64] {
        &self.gauge_flat
    }

    pub fn project(&self, f: &StatePair) -> StatePair {
        self.gauge.scale(self.coefficient(f))
    }

    /// `(I - P) f`.
    pub fn filter(&self, f: &StatePair) -> StatePair {
        f.axpy(-self.coefficient(f), &self.gauge)
    }

    pub(crate) fn filter_flat(&self, f: &mut [f64]) {
        let c = self.coefficient_flat(f);
        f.iter_mut()
            .zip(&self.gauge_flat)
            .for_each(|(x, g)| *x -= c * g);
    }

    /// `‖L (g, ĝ) - (g, ĝ)‖∞ / ‖(g, ĝ)‖∞` on `ξ ≤ ξ_max - 5h` for the analytic
    /// gauge pair.
    pub fn analytic_gauge_residual(&self) -> f64 {
        let grid = self.grid();
        let g = gauge_state(grid, self.evolver.n);
        let lg = self.evolver.apply_l(&g);
        let cut = grid.r_max - 5.0 * grid.h;
        let (mut num, mut den) = (0.0f64, 0.0f64);
        for j in 0..grid.n_points {
            if grid.nodes[j] <= cut {
                num = num
                    .max((lg.u[j] - g.u[j]).abs())
                    .max((lg.u_hat[j] - g.u_hat[j]).abs());
                den = den.max(g.u[j].abs()).max(g.u_hat[j].abs());
            }
        }
        num / den
    }
}
