use corot_core::{ModalBasis, StatePair};
use corot_noise::{NoiseModel, NoisePath};
use corot_physics::{n0_at, sinc, NonlinearityContext};

use crate::{Result, SolverError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MildOptions {
    pub t_span: f64,
    /// Quadrature step; must match the noise path step when one is given.
    pub dt: f64,
    pub max_iter: usize,
    /// Stop once successive iterates differ by less than this (sup over time
    /// and space).
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MildSolution {
    /// `(w, ŵ)` at `t_span`.
    pub state: StatePair,
    /// `‖w_{m+1} - w_m‖ / ‖w_m - w_{m-1}‖` per iteration.
    pub factors: Vec<f64>,
    pub iterations: usize,
    pub last_difference: f64,
}

/// Per-mode wave propagator over `dt`: `(cos ωdt, sin(ωdt)/ω, ω sin ωdt)`.
fn rotation(lambda: f64, dt: f64) -> (f64, f64, f64) {
    let w = lambda.sqrt();
    let y = w * dt;
    (y.cos(), dt * sinc(y), w * y.sin())
}

/// Fixed point of `w ↦ T(t)u₀ + ∫₀ᵗ T(t-s)(0, n₀(w+z)(s)) ds`, with the exact
/// modal wave propagator for `T` and trapezoidal quadrature in `s`:
/// `I_j = T(Δ)I_{j-1} + Δ/2 [T(Δ)G_{j-1} + G_j]`.
pub fn picard_mild_solve(
    initial: &StatePair,
    basis: &ModalBasis,
    noise: Option<(&NoiseModel, &NoisePath)>,
    opts: MildOptions,
) -> Result<MildSolution> {
    basis.grid.check(&initial.u)?;
    basis.grid.check(&initial.u_hat)?;
    if !(opts.dt > 0.0 && opts.t_span >= 0.0) {
        return Err(SolverError::Config(
            "mild solve needs dt > 0 and t_span >= 0".into(),
        ));
    }
    let steps = (opts.t_span / opts.dt).round() as usize;
    if ((steps as f64) * opts.dt - opts.t_span).abs() > 1e-9 * opts.t_span.max(1.0) {
        return Err(SolverError::Config(format!(
            "t_span = {} is not a multiple of dt = {}",
            opts.t_span, opts.dt
        )));
    }
    let z: Vec<Vec<f64>> = match noise {
        Some((m, p)) => {
            if (p.dt - opts.dt).abs() > 1e-12 * opts.dt || p.steps < steps {
                return Err(SolverError::Config(
                    "noise path does not match the quadrature".into(),
                ));
            }
            (0..=steps).map(|j| m.synthesize(p.z_coeffs(j).0)).collect()
        }
        None => Vec::new(),
    };
    let ctx = NonlinearityContext::new(basis.n);
    let nodes = &basis.grid.nodes;
    let m = basis.len();
    let rot: Vec<(f64, f64, f64)> = basis
        .eigenvalues
        .iter()
        .map(|&l| rotation(l, opts.dt))
        .collect();

    // free evolution T(t_j)u₀ in modal coefficients
    let mut a = basis.project(&initial.u)?;
    let mut b = basis.project(&initial.u_hat)?;
    let mut free = Vec::with_capacity(steps + 1);
    free.push((a.clone(), b.clone()));
    for _ in 0..steps {
        for k in 0..m {
            let (c, s_w, w_s) = rot[k];
            let (x, y) = (a[k], b[k]);
            a[k] = c * x + s_w * y;
            b[k] = -w_s * x + c * y;
        }
        free.push((a.clone(), b.clone()));
    }

    let synth = |c: &[f64]| {
        basis
            .synthesize(c)
            .expect("coefficient count matches the basis")
    };
    let mut current: Vec<Vec<f64>> = free.iter().map(|(a, _)| synth(a)).collect();
    let mut end = (free[steps].0.clone(), free[steps].1.clone());
    let mut factors = Vec::new();
    let mut prev_diff: Option<f64> = None;
    let mut last_difference = f64::INFINITY;
    let mut iterations = 0;
    let mut above_one = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        // G_j = velocity coefficients of n₀(w_j + z_j)
        let g: Vec<Vec<f64>> = current
            .iter()
            .enumerate()
            .map(|(j, w)| {
                let f: Vec<f64> = (0..w.len())
                    .map(|i| {
                        let arg = w[i] + z.get(j).map_or(0.0, |zj| zj[i]);
                        n0_at(nodes[i], arg, &ctx)
                    })
                    .collect();
                basis.project(&f)
            })
            .collect::<std::result::Result<_, _>>()?;
        let mut ia = vec![0.0; m];
        let mut ib = vec![0.0; m];
        let mut next = Vec::with_capacity(steps + 1);
        next.push(synth(&free[0].0));
        for j in 1..=steps {
            let h = 0.5 * opts.dt;
            for k in 0..m {
                let (c, s_w, w_s) = rot[k];
                let (x, y) = (ia[k], ib[k]);
                // T(Δ)(I + Δ/2 G_{j-1}) + Δ/2 G_j, with G = (0, g)
                let y2 = y + h * g[j - 1][k];
                ia[k] = c * x + s_w * y2;
                ib[k] = -w_s * x + c * y2 + h * g[j][k];
            }
            let wa: Vec<f64> = free[j].0.iter().zip(&ia).map(|(f, i)| f + i).collect();
            next.push(synth(&wa));
            if j == steps {
                end = (wa, free[j].1.iter().zip(&ib).map(|(f, i)| f + i).collect());
            }
        }
        let diff = next
            .iter()
            .zip(&current)
            .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
            .fold(0.0f64, f64::max);
        if let Some(p) = prev_diff {
            let f = if p > 0.0 { diff / p } else { 0.0 };
            factors.push(f);
            above_one = if f >= 1.0 { above_one + 1 } else { 0 };
            if above_one >= 2 {
                return Err(SolverError::Contraction { factors });
            }
        }
        current = next;
        last_difference = diff;
        prev_diff = Some(diff);
        if !diff.is_finite() {
            return Err(SolverError::Contraction { factors });
        }
        if diff < opts.tol {
            break;
        }
    }
    let steps_end = StatePair {
        u: synth(&end.0),
        u_hat: synth(&end.1),
    };
    Ok(MildSolution {
        state: steps_end,
        factors,
        iterations,
        last_difference,
    })
}
