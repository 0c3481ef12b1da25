use std::io::Write;

use corot_core::{RadialGrid, StatePair};
use corot_noise::{NoiseModel, NoisePath};
use corot_profiles::profile_state;
use corot_similarity::{from_similarity, Dynamics, EvolveOptions, SimilarityFrame};
use rayon::prelude::*;
use serde::Serialize;

use crate::fixed_point::{lp_fixed_point, LpSolution};
use crate::operator::LinearizedOperator;
use crate::trajectory::{initial_perturbation, z_trajectory, SampledTrajectory};
use crate::{LPConfig, LpError, Result};

const MAX_REFINEMENTS: usize = 60;

/// JSON record of one `find_T_tilde` call.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub t_blowup: f64,
    pub bracket: (f64, f64),
    /// `(T̃, coefficient)` at the scan points.
    pub scan: Vec<(f64, f64)>,
    /// `(T̃, coefficient)` of the bracketed root search.
    pub refinement: Vec<(f64, f64)>,
    pub t_tilde: f64,
    pub coefficient: f64,
    pub eigenvalue: f64,
    pub config: LPConfig,
    pub solution: LpSolution,
}

#[derive(Debug, Clone)]
pub struct TTildeResult {
    pub t_tilde: f64,
    pub coefficient: f64,
    /// `Ψ₀` at the selected `T̃`.
    pub initial: StatePair,
    pub z: Option<SampledTrajectory>,
    pub solution: LpSolution,
    pub diagnostics: Diagnostics,
}

struct Evaluation {
    t_tilde: f64,
    initial: StatePair,
    z: Option<SampledTrajectory>,
    solution: LpSolution,
}

fn evaluate(
    t_tilde: f64,
    u0: &StatePair,
    phys: &RadialGrid,
    noise: Option<(&NoiseModel, &NoisePath)>,
    t_blowup: f64,
    op: &LinearizedOperator,
    cfg: &LPConfig,
) -> Result<Evaluation> {
    let v = initial_perturbation(u0, phys, t_tilde, t_blowup, op.grid(), op.evolver.d)?;
    let z = match noise {
        Some((m, p)) => {
            let frame = SimilarityFrame::new(t_tilde, op.grid().clone())?;
            Some(z_trajectory(m, p, &frame, cfg.store_dtau, cfg.tau_max)?)
        }
        None => None,
    };
    let solution = lp_fixed_point(&v, z.as_ref(), op, cfg)?;
    Ok(Evaluation {
        t_tilde,
        initial: v,
        z,
        solution,
    })
}

/// Root of the corrector coefficient in `T̃ ∈ [T - δ/N, T + δ/N]`: a scan for a
/// sign change (evaluated in parallel), then Illinois-type regula falsi inside
/// the bracket until `|coefficient| ≤ coef_tol`.
#[allow(non_snake_case)]
pub fn find_T_tilde(
    u0: &StatePair,
    phys: &RadialGrid,
    noise: Option<(&NoiseModel, &NoisePath)>,
    t_blowup: f64,
    op: &LinearizedOperator,
    cfg: &LPConfig,
) -> Result<TTildeResult> {
    cfg.validate(t_blowup, op.evolver.n)?;
    let (lo, hi) = cfg.bracket(t_blowup);
    let k = cfg.scan_points;
    let points: Vec<f64> = (0..k)
        .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
        .collect();
    let evals: Vec<Evaluation> = points
        .par_iter()
        .map(|&t| evaluate(t, u0, phys, noise, t_blowup, op, cfg))
        .collect::<Result<_>>()?;
    let scan: Vec<(f64, f64)> = evals
        .iter()
        .map(|e| (e.t_tilde, e.solution.coefficient))
        .collect();
    let finish = |e: Evaluation, refinement: Vec<(f64, f64)>, scan: Vec<(f64, f64)>| {
        let diagnostics = Diagnostics {
            t_blowup,
            bracket: (lo, hi),
            scan,
            refinement,
            t_tilde: e.t_tilde,
            coefficient: e.solution.coefficient,
            eigenvalue: op.eigenvalue(),
            config: *cfg,
            solution: e.solution.clone(),
        };
        TTildeResult {
            t_tilde: e.t_tilde,
            coefficient: e.solution.coefficient,
            initial: e.initial,
            z: e.z,
            solution: e.solution,
            diagnostics,
        }
    };

    let best = scan
        .iter()
        .enumerate()
        .filter(|(_, (_, c))| c.abs() <= cfg.coef_tol)
        .min_by(|a, b| a.1 .1.abs().total_cmp(&b.1 .1.abs()))
        .map(|(i, _)| i);
    if let Some(i) = best {
        let e = evals.into_iter().nth(i).expect("index from the scan");
        return Ok(finish(e, Vec::new(), scan));
    }
    let Some(i) = (0..k - 1).find(|&i| scan[i].1.signum() != scan[i + 1].1.signum()) else {
        return Err(LpError::Bracket { scan });
    };

    let (mut a, mut fa) = scan[i];
    let (mut b, mut fb) = scan[i + 1];
    let mut refinement = Vec::new();
    let mut last = None;
    for _ in 0..MAX_REFINEMENTS {
        let mut c = b - fb * (b - a) / (fb - fa);
        if !(c > a.min(b) && c < a.max(b)) {
            c = 0.5 * (a + b);
        }
        let e = evaluate(c, u0, phys, noise, t_blowup, op, cfg)?;
        let fc = e.solution.coefficient;
        refinement.push((c, fc));
        let done = fc.abs() <= cfg.coef_tol || (b - a).abs() <= 4.0 * f64::EPSILON * c.abs();
        last = Some(e);
        if done {
            break;
        }
        if fc.signum() != fb.signum() {
            a = b;
            fa = fb;
        } else {
            fa *= 0.5;
        }
        b = c;
        fb = fc;
    }
    let e = last.expect("at least one refinement step");
    Ok(finish(e, refinement, scan))
}

pub fn write_diagnostics<W: Write>(diag: &Diagnostics, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, diag).map_err(|e| LpError::Output(e.to_string()))
}

/// Physical `w(t, r) = (Φ + Ψ)(τ, r/(T̃-t)) / (T̃-t)` (velocity with `(T̃-t)²`)
/// on the nodes of spacing `h` inside `r ≤ ξ_max (T̃ - t)`.
pub fn reconstruct_w(
    psi: &SampledTrajectory,
    op: &LinearizedOperator,
    t_tilde: f64,
    t: f64,
    h: f64,
) -> Result<(RadialGrid, StatePair)> {
    let frame = SimilarityFrame::new(t_tilde, op.grid().clone())?;
    let tau = frame.tau(t)?;
    let cells = (op.grid().r_max * frame.scale(tau) / h).floor() as usize;
    if cells == 0 {
        return Err(LpError::Domain(format!(
            "no node of spacing {h} inside the cone at t = {t}"
        )));
    }
    let sub = RadialGrid::new(cells as f64 * h, cells)?;
    let w = profile_state(op.grid(), op.evolver.d)?.axpy(1.0, &psi.at(tau)?);
    Ok((sub.clone(), from_similarity(&w, &frame, tau, &sub)?))
}

/// Log-linear fit of `‖S(τ)(I-P)w‖∞`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub taus: Vec<f64>,
    pub norms: Vec<f64>,
    /// Fitted exponent; negative means decay.
    pub rate: f64,
    /// `M` in `‖·‖ ≤ M e^{rate τ} ‖(I-P)w‖`, the largest ratio over the samples.
    pub constant: f64,
}

/// Least-squares slope of `log y` against `x`.
pub fn fit_exponent(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = x.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Linearized evolution of `(I - P) w` over `[0, tau_span]`.
pub fn filtered_decay(
    op: &LinearizedOperator,
    w: &StatePair,
    tau_span: f64,
    samples: usize,
) -> Result<DecayFit> {
    let w0 = op.filter(w);
    let (steps, _) = op.evolver.plan(tau_span, None)?;
    let stride = (steps / samples.max(1)).max(1);
    let traj = op.evolver.evolve(
        &w0,
        tau_span,
        Dynamics::Linearized,
        EvolveOptions { dtau: None, stride },
    )?;
    let norms: Vec<f64> = traj.states.iter().map(|s| s.sup_norm()).collect();
    let rate = fit_exponent(&traj.taus, &norms);
    let n0 = norms[0];
    let constant = traj
        .taus
        .iter()
        .zip(&norms)
        .map(|(t, v)| v / (n0 * (rate * t).exp()))
        .fold(0.0, f64::max);
    Ok(DecayFit {
        taus: traj.taus,
        norms,
        rate,
        constant,
    })
}
