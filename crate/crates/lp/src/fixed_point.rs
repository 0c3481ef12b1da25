use corot_core::StatePair;
use corot_physics::n_remainder_at;
use serde::Serialize;

use crate::operator::{deinterleave, interleave, LinearizedOperator};
use crate::trajectory::SampledTrajectory;
use crate::{LPConfig, LpError, Result};

/// `P(v + ∫₀^{τ_max} e^{-λs} F(s) ds)` and a bound for the neglected tail.
#[derive(Debug, Clone, PartialEq)]
pub struct Corrector {
    /// Gauge coefficient; `vector = coefficient · gauge`.
    pub coefficient: f64,
    pub vector: StatePair,
    /// `e^{-λ τ_max} sup_s |⟨F(s), cogauge⟩| / λ`.
    pub tail_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LpSolution {
    #[serde(skip)]
    pub psi: SampledTrajectory,
    /// Corrector coefficient at `psi`.
    pub coefficient: f64,
    pub tail_bound: f64,
    /// Ratios of successive weighted differences.
    pub factors: Vec<f64>,
    pub iterations: usize,
    /// `‖Ψ - K(Ψ)‖` in the weighted norm.
    pub defect: f64,
    pub converged: bool,
    /// `sup_τ e^{ω̄τ} ‖Ψ(τ)‖∞`.
    pub weighted_norm: f64,
    pub within_ball: bool,
}

/// `F = N(Ψ+Z) + VZ` (interleaved, first component zero) and its gauge
/// coefficients at the first `count` samples.
fn forcing_series(
    op: &LinearizedOperator,
    psi: &SampledTrajectory,
    z: Option<&SampledTrajectory>,
    count: usize,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let ev = &op.evolver;
    let m = ev.len();
    let mut forces = Vec::with_capacity(count);
    let mut coefs = Vec::with_capacity(count);
    for i in 0..count {
        let ps = &psi.states[i];
        let mut f = vec![0.0; 2 * m];
        for j in 0..m {
            let zu = z.map_or(0.0, |z| z.states[i].u[j]);
            let xi = ev.grid.nodes[j];
            f[2 * j + 1] =
                n_remainder_at(xi, ev.phi[j], ps.u[j] + zu, &ev.ctx) + ev.potential[j] * zu;
        }
        coefs.push(op.coefficient_flat(&f));
        forces.push(f);
    }
    (forces, coefs)
}

/// `q_i = ∫_{τ_i}^{τ_max} e^{λ(τ_i - s)} p(s) ds` for `p` linear between samples.
fn backward_tail(p: &[f64], lambda: f64, dtau: f64) -> Vec<f64> {
    let e = (-lambda * dtau).exp();
    let i0 = (1.0 - e) / lambda;
    let i1 = (1.0 - e * (1.0 + lambda * dtau)) / (lambda * lambda * dtau);
    let (a, b) = (i0 - i1, i1);
    let mut q = vec![0.0; p.len()];
    for i in (0..p.len() - 1).rev() {
        q[i] = e * q[i + 1] + a * p[i] + b * p[i + 1];
    }
    q
}

fn tail_bound(p: &[f64], lambda: f64, tau_max: f64) -> f64 {
    (-lambda * tau_max).exp() * p.iter().fold(0.0f64, |m, x| m.max(x.abs())) / lambda
}

fn samples_for(traj: &SampledTrajectory, cfg: &LPConfig, what: &str) -> Result<usize> {
    let k = SampledTrajectory::sample_count(cfg.tau_max, traj.dtau);
    if traj.states.len() < k {
        return Err(LpError::Domain(format!(
            "{what} covers tau <= {}, tau_max = {} is needed",
            traj.tau_max(),
            cfg.tau_max
        )));
    }
    Ok(k)
}

/// Corrector `P(v + ∫₀^∞ e^{-s}(N(Ψ+Z) + VZ) ds)`, with the discrete growth
/// rate `λ` in place of 1 and the integral truncated at `cfg.tau_max`.
pub fn corrector(
    v: &StatePair,
    psi: &SampledTrajectory,
    z: Option<&SampledTrajectory>,
    op: &LinearizedOperator,
    cfg: &LPConfig,
) -> Result<Corrector> {
    let k = samples_for(psi, cfg, "psi trajectory")?;
    if let Some(z) = z {
        if (z.dtau - psi.dtau).abs() > 1e-12 * psi.dtau {
            return Err(LpError::Domain("psi and Z are sampled differently".into()));
        }
        samples_for(z, cfg, "Z trajectory")?;
    }
    let (_, p) = forcing_series(op, psi, z, k);
    let lambda = op.eigenvalue();
    let q = backward_tail(&p, lambda, psi.dtau);
    let coefficient = op.coefficient(v) + q[0];
    Ok(Corrector {
        coefficient,
        vector: op.gauge.scale(coefficient),
        tail_bound: tail_bound(&p, lambda, psi.dtau * (k - 1) as f64),
    })
}

/// `X' = LX + G(τ)` from `X(0) = x0` with RK4, `G` linear between the samples,
/// projecting out the gauge direction after every step.
fn filtered_forced_evolution(
    op: &LinearizedOperator,
    x0: Vec<f64>,
    forcing: &[Vec<f64>],
    store_dtau: f64,
) -> Vec<Vec<f64>> {
    let sub = (store_dtau / op.evolver.default_dtau()).ceil() as usize;
    let h = store_dtau / sub as f64;
    let len = x0.len();
    let a = &op.matrix;
    let mut x = x0;
    let mut out = Vec::with_capacity(forcing.len());
    out.push(x.clone());
    let (mut k1, mut k2, mut k3, mut k4) = (
        vec![0.0; len],
        vec![0.0; len],
        vec![0.0; len],
        vec![0.0; len],
    );
    let mut tmp = vec![0.0; len];
    let mut g = vec![0.0; len];
    let fill = |g: &mut [f64], i: usize, theta: f64| {
        for ((o, p), q) in g.iter_mut().zip(&forcing[i]).zip(&forcing[i + 1]) {
            *o = (1.0 - theta) * p + theta * q;
        }
    };
    for i in 0..forcing.len() - 1 {
        for s in 0..sub {
            let th0 = s as f64 / sub as f64;
            let thm = (s as f64 + 0.5) / sub as f64;
            let th1 = (s + 1) as f64 / sub as f64;
            fill(&mut g, i, th0);
            a.mul_into(&x, &mut k1);
            k1.iter_mut().zip(&g).for_each(|(k, g)| *k += g);
            fill(&mut g, i, thm);
            tmp.iter_mut()
                .zip(&x)
                .zip(&k1)
                .for_each(|((t, x), k)| *t = x + 0.5 * h * k);
            a.mul_into(&tmp, &mut k2);
            k2.iter_mut().zip(&g).for_each(|(k, g)| *k += g);
            tmp.iter_mut()
                .zip(&x)
                .zip(&k2)
                .for_each(|((t, x), k)| *t = x + 0.5 * h * k);
            a.mul_into(&tmp, &mut k3);
            k3.iter_mut().zip(&g).for_each(|(k, g)| *k += g);
            fill(&mut g, i, th1);
            tmp.iter_mut()
                .zip(&x)
                .zip(&k3)
                .for_each(|((t, x), k)| *t = x + h * k);
            a.mul_into(&tmp, &mut k4);
            k4.iter_mut().zip(&g).for_each(|(k, g)| *k += g);
            for j in 0..len {
                x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
            op.filter_flat(&mut x);
        }
        out.push(x.clone());
    }
    out
}

/// Picard iteration for `Ψ = K_{v,Z}(Ψ)` on `[0, τ_max]`, starting from `Ψ ≡ 0`.
///
/// Stops once `‖K(Ψ) - Ψ‖ < picard_tol` in `sup_τ e^{ω̄τ}‖·‖∞`; the returned
/// trajectory is the last iterate whose defect was measured.
pub fn lp_fixed_point(
    v: &StatePair,
    z: Option<&SampledTrajectory>,
    op: &LinearizedOperator,
    cfg: &LPConfig,
) -> Result<LpSolution> {
    let m = op.evolver.len();
    op.grid().check(&v.u)?;
    op.grid().check(&v.u_hat)?;
    let bound = cfg.delta / cfg.big_c;
    let vn = v.sup_norm();
    if vn > bound {
        return Err(LpError::Smallness {
            what: "initial perturbation",
            norm: vn,
            bound,
        });
    }
    let k = SampledTrajectory::sample_count(cfg.tau_max, cfg.store_dtau);
    if let Some(z) = z {
        if (z.dtau - cfg.store_dtau).abs() > 1e-12 * cfg.store_dtau || z.states.len() < k {
            return Err(LpError::Domain(
                "Z trajectory does not match the LP sampling".into(),
            ));
        }
        let zn = z.states[..k]
            .iter()
            .map(|s| s.sup_norm())
            .fold(0.0, f64::max);
        if zn > bound {
            return Err(LpError::Smallness {
                what: "noise term Z",
                norm: zn,
                bound,
            });
        }
    }
    let lambda = op.eigenvalue();
    let v_coef = op.coefficient(v);
    let mut x0 = interleave(v);
    op.filter_flat(&mut x0);

    let mut psi = SampledTrajectory::zeros(m, cfg.store_dtau, k);
    let mut factors = Vec::new();
    let mut prev: Option<f64> = None;
    let mut above = 0;
    let mut iterations = 0;
    loop {
        iterations += 1;
        let (mut forces, p) = forcing_series(op, &psi, z, k);
        for (f, c) in forces.iter_mut().zip(&p) {
            f.iter_mut()
                .zip(op.gauge_flat())
                .for_each(|(x, g)| *x -= c * g);
        }
        let xs = filtered_forced_evolution(op, x0.clone(), &forces, cfg.store_dtau);
        let q = backward_tail(&p, lambda, cfg.store_dtau);
        let next: Vec<StatePair> = xs
            .iter()
            .zip(&q)
            .map(|(x, qi)| deinterleave(x).axpy(-qi, &op.gauge))
            .collect();
        let mut diff = 0.0f64;
        for (i, (a, b)) in next.iter().zip(&psi.states).enumerate() {
            let w = (cfg.omega_bar * i as f64 * cfg.store_dtau).exp();
            diff = diff.max(w * a.axpy(-1.0, b).sup_norm());
        }
        if !diff.is_finite() {
            return Err(LpError::Divergence);
        }
        let coefficient = v_coef + q[0];
        let tail = tail_bound(&p, lambda, cfg.tau_max);
        if let Some(pd) = prev {
            let f = if pd > 0.0 { diff / pd } else { 0.0 };
            factors.push(f);
            above = if f >= 1.0 { above + 1 } else { 0 };
            if above >= 3 {
                return Err(LpError::NonContraction { factors });
            }
        }
        let converged = diff < cfg.picard_tol;
        if converged || iterations >= cfg.picard_max_iter {
            let weighted_norm = psi.weighted_norm(cfg.omega_bar);
            return Ok(LpSolution {
                psi,
                coefficient,
                tail_bound: tail,
                factors,
                iterations,
                defect: diff,
                converged,
                weighted_norm,
                within_ball: weighted_norm <= cfg.delta,
            });
        }
        prev = Some(diff);
        psi.states = next;
    }
}
