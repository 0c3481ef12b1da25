use std::collections::VecDeque;

use corot_core::{energy, ConservativeLaplacian, ModalBasis, RadialGrid, SobolevOrder, StatePair};
use corot_noise::{sample_convolution, NoiseModel, NoisePath};
use corot_physics::{n0_at, NonlinearityContext};
use corot_similarity::{estimate_T_tilde, psi_discrepancy, DiscrepancyProbe, TTildeEstimate};
use serde::Serialize;

use crate::{Result, SolverConfig, SolverError, SolverMode};

/// Default blowup amplitude in units of `Φ(0)/h`: the largest central value a
/// grid of spacing `h` resolves before the profile width `T - t` drops below a
/// few cells.
pub const DEFAULT_AMP_FACTOR: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Trigger {
    None,
    Amplitude,
    Divergence,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ExitNorms {
    /// `(Σ λ^s a² + λ^{s-1} b²)^{1/2}` over the modal coefficients.
    pub sobolev_s: Option<f64>,
    /// Same with `k`.
    pub sobolev_k: Option<f64>,
    pub energy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupReport {
    pub blew_up: bool,
    pub trigger: Trigger,
    pub t_exit: f64,
    pub t_hat: Option<f64>,
    /// Drift between the two newest fit windows.
    pub t_hat_drift: Option<f64>,
    pub fit_slope: Option<f64>,
    pub fit_error: Option<String>,
    /// `T̂ ∈ (t_exit, t_exit + 10 dt]`.
    pub t_hat_in_window: Option<bool>,
    pub sup_amp: f64,
    pub exit_norms: ExitNorms,
    /// First time the Sobolev surrogate crossed `norm_threshold`.
    pub norm_trigger_time: Option<f64>,
    /// `(t, sup_ξ |(T̂-t)u(t,(T̂-t)ξ) - Φ|)` at the latest stored states.
    pub discrepancy_history: Vec<(f64, f64)>,
    pub profile_err_final: Option<f64>,
    /// `(t, u(t, r₀))` at every step, `r₀` the first node.
    pub central_history: Vec<(f64, f64)>,
    pub dt: f64,
    pub steps: usize,
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub report: BlowupReport,
    /// Physical `(u, û)` at exit (for `Dpd` this is `w + z`).
    pub final_state: StatePair,
    /// Split-mode `(w, ŵ)` at exit.
    pub final_w: Option<StatePair>,
    /// `(t, Sobolev s-part, k-part)` every `norm_stride` steps.
    pub norm_log: Vec<(f64, f64, f64)>,
    pub snapshots: Vec<(f64, StatePair)>,
}

/// Modal `Ḣ^s`- and `Ḣ^k`-type parts of a pair (velocity one order lower).
pub fn split_norms(
    state: &StatePair,
    basis: &ModalBasis,
    order: SobolevOrder,
) -> Result<(f64, f64)> {
    let a = basis.project(&state.u)?;
    let b = basis.project(&state.u_hat)?;
    let k = order.k as i32;
    let (mut s_part, mut k_part) = (0.0, 0.0);
    for ((&l, x), y) in basis.eigenvalues.iter().zip(&a).zip(&b) {
        s_part += l.powf(order.s) * x * x + l.powf(order.s - 1.0) * y * y;
        k_part += l.powi(k) * x * x + l.powi(k - 1) * y * y;
    }
    Ok((s_part.sqrt(), k_part.sqrt()))
}

/// Leapfrog integrator bound to a configuration and optional noise model.
pub struct Solver<'a> {
    pub config: SolverConfig,
    lap: ConservativeLaplacian,
    ctx: NonlinearityContext,
    noise: Option<&'a NoiseModel>,
    basis: Option<&'a ModalBasis>,
    probe: DiscrepancyProbe,
    dt: f64,
    steps: usize,
}

impl<'a> Solver<'a> {
    pub fn new(
        config: SolverConfig,
        noise: Option<&'a NoiseModel>,
        basis: Option<&'a ModalBasis>,
    ) -> Result<Self> {
        config.validate()?;
        let n = config.n();
        for g in noise
            .map(|m| &m.grid)
            .into_iter()
            .chain(basis.map(|b| &b.grid))
        {
            if g != &config.grid {
                return Err(SolverError::Config(
                    "noise/basis grid differs from the solver grid".into(),
                ));
            }
        }
        let lap = ConservativeLaplacian::new(&config.grid, n)?;
        let target = config.dt_factor * config.grid.h;
        let steps = (config.t_final / target).ceil() as usize;
        let dt = config.t_final / steps as f64;
        let xi = RadialGrid::new(config.xi_max, config.xi_points)?;
        let probe = DiscrepancyProbe::new(xi, config.d)?;
        Ok(Self {
            ctx: NonlinearityContext::new(n),
            lap,
            noise,
            basis,
            probe,
            dt,
            steps,
            config,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.config.grid
    }

    /// The path consumed by [`Solver::solve`] for `seed`; `None` without noise.
    pub fn sample_path(&self, seed: u64) -> Result<Option<NoisePath>> {
        match self.noise {
            Some(m) if !m.is_off() => Ok(Some(sample_convolution(
                m,
                self.dt,
                self.steps as f64 * self.dt,
                seed,
            )?)),
            _ => Ok(None),
        }
    }

    fn z_field(&self, path: Option<&NoisePath>, step: usize, out: &mut [f64]) -> bool {
        match (path, self.noise) {
            (Some(p), Some(m)) => {
                m.synthesize_into(p.z_coeffs(step).0, out);
                true
            }
            _ => false,
        }
    }

    /// `out = Δ_h w + n₀(w + z)`.
    fn accel(&self, w: &[f64], z: Option<&[f64]>, out: &mut [f64]) {
        self.lap.apply_into(w, out);
        if !self.config.nonlinear {
            return;
        }
        let nodes = &self.config.grid.nodes;
        for j in 0..w.len() {
            let arg = w[j] + z.map_or(0.0, |z| z[j]);
            out[j] += n0_at(nodes[j], arg, &self.ctx);
        }
    }

    /// Advances `state` from `t = step·dt` to `(step+1)·dt` (kick-drift-kick).
    ///
    /// `Direct`: `state = (u, û)`, the Brownian increment of the step is added
    /// to `û` in the second half-kick. `Dpd`: `state = (w, ŵ)`, forcing uses
    /// `z` at both ends of the step.
    pub fn step(&self, state: &mut StatePair, step: usize, path: Option<&NoisePath>) -> Result<()> {
        let m = state.len();
        let h = 0.5 * self.dt;
        let mut acc = vec![0.0; m];
        let mut z = vec![0.0; m];
        let dpd = self.config.mode == SolverMode::Dpd;
        let has_z = dpd && self.z_field(path, step, &mut z);
        self.accel(&state.u, has_z.then_some(&z[..]), &mut acc);
        for (v, a) in state.u_hat.iter_mut().zip(&acc) {
            *v += h * a;
        }
        for (u, v) in state.u.iter_mut().zip(&state.u_hat) {
            *u += self.dt * v;
        }
        let has_z = dpd && self.z_field(path, step + 1, &mut z);
        self.accel(&state.u, has_z.then_some(&z[..]), &mut acc);
        for (v, a) in state.u_hat.iter_mut().zip(&acc) {
            *v += h * a;
        }
        if !dpd {
            if let (Some(p), Some(model)) = (path, self.noise) {
                model.synthesize_into(p.increment(step), &mut z);
                state.u_hat.iter_mut().zip(&z).for_each(|(v, k)| *v += k);
            }
        }
        if !state.is_finite() {
            return Err(SolverError::Divergence {
                t: (step + 1) as f64 * self.dt,
            });
        }
        Ok(())
    }

    /// Physical `(u, û)` from the stepped state.
    fn physical(&self, state: &StatePair, path: Option<&NoisePath>, step: usize) -> StatePair {
        if self.config.mode == SolverMode::Direct {
            return state.clone();
        }
        match (path, self.noise) {
            (Some(p), Some(m)) => {
                let (a, b) = p.z_coeffs(step);
                let z = StatePair {
                    u: m.synthesize(a),
                    u_hat: m.synthesize(b),
                };
                state.axpy(1.0, &z)
            }
            _ => state.clone(),
        }
    }

    pub fn solve(&self, initial: &StatePair, seed: u64) -> Result<SolveOutput> {
        let path = self.sample_path(seed)?;
        self.solve_with_path(initial, path.as_ref())
    }

    /// Integrates to `t_final` or the amplitude threshold with a given path.
    pub fn solve_with_path(
        &self,
        initial: &StatePair,
        path: Option<&NoisePath>,
    ) -> Result<SolveOutput> {
        let cfg = &self.config;
        cfg.grid.check(&initial.u)?;
        cfg.grid.check(&initial.u_hat)?;
        if let Some(p) = path {
            if (p.dt - self.dt).abs() > 1e-12 * self.dt || p.steps < self.steps {
                return Err(SolverError::Config(format!(
                    "noise path (dt {}, {} steps) does not cover the run (dt {}, {} steps)",
                    p.dt, p.steps, self.dt, self.steps
                )));
            }
        }
        let mut state = initial.clone();
        let mut central = vec![(0.0, initial.u[0])];
        let mut norm_log = Vec::new();
        let mut ring: VecDeque<(f64, StatePair)> = VecDeque::new();
        let mut snapshots = Vec::new();
        if cfg.record_stride > 0 {
            snapshots.push((0.0, initial.clone()));
        }
        let mut trigger = Trigger::None;
        let mut t_exit = cfg.t_final;
        let mut norm_trigger_time = None;
        let mut sup_amp = initial.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut phys = initial.clone();
        let mut taken = 0;
        for s in 0..self.steps {
            let t = (s + 1) as f64 * self.dt;
            if let Err(SolverError::Divergence { t: tf }) = self.step(&mut state, s, path) {
                trigger = Trigger::Divergence;
                t_exit = tf;
                break;
            }
            taken = s + 1;
            phys = self.physical(&state, path, s + 1);
            central.push((t, phys.u[0]));
            let amp = phys.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            sup_amp = sup_amp.max(amp);
            if (s + 1) % cfg.measure_stride == 0 {
                ring.push_back((t, phys.clone()));
                if ring.len() > cfg.measure_points.max(1) {
                    ring.pop_front();
                }
            }
            if cfg.record_stride > 0 && (s + 1) % cfg.record_stride == 0 {
                snapshots.push((t, phys.clone()));
            }
            if let (Some(b), true) = (
                self.basis,
                cfg.norm_stride > 0 && (s + 1) % cfg.norm_stride == 0,
            ) {
                let (ns, nk) = split_norms(&phys, b, cfg.order)?;
                norm_log.push((t, ns, nk));
                if norm_trigger_time.is_none() && (ns * ns + nk * nk).sqrt() >= cfg.norm_threshold {
                    norm_trigger_time = Some(t);
                }
            }
            if amp >= cfg.amp_threshold {
                trigger = Trigger::Amplitude;
                t_exit = t;
                break;
            }
        }
        if trigger == Trigger::None {
            t_exit = self.steps as f64 * self.dt;
        }
        let blew_up = trigger != Trigger::None;

        let (mut t_hat, mut drift, mut slope, mut fit_error) = (None, None, None, None);
        if blew_up {
            let (ts, us): (Vec<f64>, Vec<f64>) = central.iter().copied().unzip();
            match estimate_T_tilde(&ts, &us, cfg.grid.nodes[0], cfg.d, cfg.fit) {
                Ok(TTildeEstimate {
                    t_hat: th,
                    slope: sl,
                    drift: dr,
                    ..
                }) => {
                    t_hat = Some(th);
                    drift = Some(dr);
                    slope = Some(sl);
                }
                Err(e) => fit_error = Some(e.to_string()),
            }
        }
        let mut discrepancy_history = Vec::new();
        if let Some(th) = t_hat {
            for (t, st) in &ring {
                if *t < th {
                    if let Ok(d) = psi_discrepancy(st, &cfg.grid, *t, th, &self.probe) {
                        discrepancy_history.push((*t, d.sup));
                    }
                }
            }
        }
        let finite = phys.is_finite();
        let mut exit_norms = ExitNorms::default();
        if finite {
            exit_norms.energy = Some(energy(&phys, &cfg.grid, cfg.n())?);
            if let Some(b) = self.basis {
                let (ns, nk) = split_norms(&phys, b, cfg.order)?;
                exit_norms.sobolev_s = Some(ns);
                exit_norms.sobolev_k = Some(nk);
            }
        }
        let report = BlowupReport {
            blew_up,
            trigger,
            t_exit,
            t_hat,
            t_hat_drift: drift,
            fit_slope: slope,
            fit_error,
            t_hat_in_window: t_hat.map(|th| th > t_exit && th <= t_exit + 10.0 * self.dt),
            sup_amp,
            exit_norms,
            norm_trigger_time,
            profile_err_final: discrepancy_history.last().map(|d| d.1),
            discrepancy_history,
            central_history: central,
            dt: self.dt,
            steps: taken,
        };
        let final_w = (cfg.mode == SolverMode::Dpd).then(|| state.clone());
        Ok(SolveOutput {
            report,
            final_state: phys,
            final_w,
            norm_log,
            snapshots,
        })
    }
}
