use corot_core::{ModalBasis, SobolevOrder, StatePair};
use corot_noise::{NoiseModel, NoisePath};
use corot_solver::{split_norms, Solver, SolverConfig, SolverMode, Trigger};
use rayon::prelude::*;
use serde::Serialize;

use crate::{forcing_from_state, steering_state, z_from_forcing, Control, Result, SteeringProblem};

#[derive(Debug, Clone, PartialEq)]
pub struct SteeringOptions {
    /// Sup-norm sizes of the perturbations in the continuity table.
    pub perturbation_sizes: Vec<f64>,
    pub order: SobolevOrder,
}

impl Default for SteeringOptions {
    fn default() -> Self {
        Self {
            perturbation_sizes: vec![1e-2, 1e-3, 1e-4],
            order: SobolevOrder::diagnostic(1.6, 6),
        }
    }
}

/// Endpoint shift of `w + z` when `u₀` (resp. `z`) is perturbed by `size`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityRow {
    pub size: f64,
    pub data_shift: Option<f64>,
    pub control_shift: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteeringReport {
    pub t1: f64,
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    /// Largest deviation of the four steering endpoint identities.
    pub construction_error: f64,
    /// `‖w(T₁) + z(T₁) - u₁‖∞`.
    pub endpoint_error: Option<f64>,
    pub endpoint_velocity_error: Option<f64>,
    /// Modal `(s, k)` parts of the endpoint error.
    pub endpoint_sobolev: Option<(f64, f64)>,
    /// `sup_t ‖w - (u - z)‖∞` over the run.
    pub max_w_deviation: Option<f64>,
    pub control_sup: f64,
    pub continuity: Vec<ContinuityRow>,
    /// Set when the split solver stopped before `T₁`.
    pub failure: Option<String>,
}

/// `z` as a deterministic path of the split solver (unit amplitudes on every mode).
fn as_path(control: &Control) -> NoisePath {
    let m = control.z_coeffs[0].len();
    let steps = control.states.len() - 1;
    NoisePath {
        dt: control.dt,
        steps,
        modes: m,
        seed: 0,
        increments: vec![0.0; steps * m],
        z: control.z_coeffs.concat(),
        z_dot: control.z_dot_coeffs.concat(),
    }
}

struct Run {
    final_state: StatePair,
    w_dev: f64,
}

fn run(
    solver: &Solver,
    initial: &StatePair,
    path: &NoisePath,
    u: Option<&[StatePair]>,
    z: &[StatePair],
) -> std::result::Result<Run, String> {
    let out = solver
        .solve_with_path(initial, Some(path))
        .map_err(|e| e.to_string())?;
    match out.report.trigger {
        Trigger::None => {}
        Trigger::Amplitude => {
            return Err(format!(
                "amplitude threshold hit at t = {}",
                out.report.t_exit
            ))
        }
        Trigger::Divergence => return Err(format!("solver diverged at t = {}", out.report.t_exit)),
    }
    let stride = solver.config.record_stride.max(1);
    let mut w_dev = 0.0f64;
    if let Some(u) = u {
        for (i, (_, snap)) in out.snapshots.iter().enumerate() {
            let j = i * stride;
            // snapshots hold w + z; compare w with u - z
            let w_exp = u[j].axpy(-1.0, &z[j]);
            let w = snap.axpy(-1.0, &z[j]);
            w_dev = w_dev.max(w.axpy(-1.0, &w_exp).sup_norm());
        }
    }
    Ok(Run {
        final_state: out.final_state,
        w_dev,
    })
}

/// Steers with the construction, re-solves `w` from `u₀` with the split solver
/// and the synthesized `z`, and tabulates the endpoint response to
/// perturbations of `u₀` and `z`.
///
/// `config` supplies grid, `d`, `dt_factor` and thresholds; its mode and
/// `t_final` are overridden.
pub fn verify_steering(
    problem: &SteeringProblem,
    basis: &ModalBasis,
    config: &SolverConfig,
    options: &SteeringOptions,
) -> Result<SteeringReport> {
    let mut cfg = config.clone();
    cfg.mode = SolverMode::Dpd;
    cfg.t_final = problem.t1;
    cfg.record_stride = 1;
    let model = NoiseModel::with_sigmas(basis, vec![1.0; basis.len()], 1.0, 0.0)?;
    let solver = Solver::new(cfg, Some(&model), None)?;
    let steps = solver.steps();

    let traj = steering_state(problem, basis, steps)?;
    let ends = [
        traj.states[0].axpy(-1.0, &problem.u0).sup_norm(),
        traj.states[steps].axpy(-1.0, &problem.u1).sup_norm(),
    ];
    let forcing = forcing_from_state(&traj, basis, config.d)?;
    let control = z_from_forcing(&forcing, basis)?;
    let path = as_path(&control);
    let control_sup = control
        .states
        .iter()
        .map(|s| s.sup_norm())
        .fold(0.0, f64::max);

    let mut report = SteeringReport {
        t1: problem.t1,
        h: basis.grid.h,
        dt: solver.dt(),
        steps,
        construction_error: ends[0].max(ends[1]),
        endpoint_error: None,
        endpoint_velocity_error: None,
        endpoint_sobolev: None,
        max_w_deviation: None,
        control_sup,
        continuity: Vec::new(),
        failure: None,
    };
    let nominal = match run(
        &solver,
        &problem.u0,
        &path,
        Some(&traj.states),
        &control.states,
    ) {
        Ok(r) => r,
        Err(e) => {
            report.failure = Some(e);
            return Ok(report);
        }
    };
    let err = nominal.final_state.axpy(-1.0, &problem.u1);
    report.endpoint_error = Some(err.u.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    report.endpoint_velocity_error = Some(err.u_hat.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    report.endpoint_sobolev = Some(split_norms(&err, basis, options.order)?);
    report.max_w_deviation = Some(nominal.w_dev);

    // smooth unit-sup bump in the middle of the domain
    let r_max = basis.grid.r_max;
    let bump = basis
        .grid
        .sample(|r| (-((r - 0.3 * r_max) / (0.1 * r_max)).powi(2)).exp());
    let bump_k = basis.project(&bump)?;
    let zeros = vec![0.0; bump.len()];
    let shift = |r: std::result::Result<Run, String>| {
        r.ok()
            .map(|r| r.final_state.axpy(-1.0, &nominal.final_state).sup_norm())
    };
    report.continuity = options
        .perturbation_sizes
        .par_iter()
        .map(|&eps| {
            let u0 = problem.u0.axpy(
                eps,
                &StatePair {
                    u: bump.clone(),
                    u_hat: zeros.clone(),
                },
            );
            let data_shift = shift(run(&solver, &u0, &path, None, &control.states));
            // z + eps (t/T₁) bump keeps z(0) = 0 and ẑ = ∂_t z
            let mut p = path.clone();
            let m = p.modes;
            for s in 0..=steps {
                let th = s as f64 / steps as f64;
                for k in 0..m {
                    p.z[s * m + k] += eps * th * bump_k[k];
                    p.z_dot[s * m + k] += eps * bump_k[k] / problem.t1;
                }
            }
            let control_shift = shift(run(&solver, &problem.u0, &p, None, &control.states));
            ContinuityRow {
                size: eps,
                data_shift,
                control_shift,
            }
        })
        .collect();
    Ok(report)
}
