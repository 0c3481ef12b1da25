use std::io::Write;

use corot_core::{extend, Closure, RadialGrid, StatePair};
use corot_physics::{n0_into, n_remainder_at, potential_V, NonlinearityContext};
use corot_profiles::profile_state;

use crate::{Result, SimilarityError};

/// Right-hand side selector for [`Evolver::evolve`].
#[derive(Clone, Copy)]
pub enum Dynamics<'a> {
    /// `L₀U + n(U)`.
    Full,
    /// `LΨ = L₀Ψ + VΨ`.
    Linearized,
    /// `LΨ + N(Ψ+Z) + VZ` with `Z(τ)` supplied on the same grid.
    Forced(&'a (dyn Fn(f64) -> StatePair + Sync)),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvolveOptions {
    /// Overrides the default step `0.8 h/(ξ_max + 1)`.
    pub dtau: Option<f64>,
    /// Keep every `stride`-th state; `0` keeps only the endpoints.
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub taus: Vec<f64>,
    pub states: Vec<StatePair>,
}

impl Trajectory {
    pub fn last(&self) -> &StatePair {
        self.states
            .last()
            .expect("trajectory holds the initial state")
    }

    /// Rows `tau, xi, U, U_hat`.
    pub fn write_csv<W: Write>(&self, grid: &RadialGrid, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| SimilarityError::Output(e.to_string());
        w.write_record(["tau", "xi", "U", "U_hat"]).map_err(err)?;
        for (tau, s) in self.taus.iter().zip(&self.states) {
            for ((x, a), b) in grid.nodes.iter().zip(&s.u).zip(&s.u_hat) {
                w.serialize((tau, x, a, b)).map_err(err)?;
            }
        }
        w.flush()
            .map_err(|e| SimilarityError::Output(e.to_string()))
    }
}

/// Classical fourth-order Runge–Kutta step for `∂_τ X = f(τ, X)`.
pub fn rk4_step<F: Fn(f64, &StatePair) -> StatePair>(
    f: &F,
    tau: f64,
    x: &StatePair,
    dtau: f64,
) -> StatePair {
    let k1 = f(tau, x);
    let k2 = f(tau + 0.5 * dtau, &x.axpy(0.5 * dtau, &k1));
    let k3 = f(tau + 0.5 * dtau, &x.axpy(0.5 * dtau, &k2));
    let k4 = f(tau + dtau, &x.axpy(dtau, &k3));
    let w = dtau / 6.0;
    let mut out = x.clone();
    for j in 0..x.len() {
        out.u[j] += w * (k1.u[j] + 2.0 * k2.u[j] + 2.0 * k3.u[j] + k4.u[j]);
        out.u_hat[j] += w * (k1.u_hat[j] + 2.0 * k2.u_hat[j] + 2.0 * k3.u_hat[j] + k4.u_hat[j]);
    }
    out
}

/// Method of lines on a similarity grid: fourth-order centered `Δ`, third-order
/// upwind-biased `ξ∂_ξ`, even reflection at the origin and extrapolated ghosts
/// at `ξ_max`.
#[derive(Debug, Clone)]
pub struct Evolver {
    pub grid: RadialGrid,
    pub d: usize,
    pub n: usize,
    pub ctx: NonlinearityContext,
    /// `Φ` on the grid.
    pub phi: Vec<f64>,
    /// `V(ξ)` on the grid.
    pub potential: Vec<f64>,
}

impl Evolver {
    pub fn new(grid: RadialGrid, d: usize) -> Result<Self> {
        if grid.n_points < 8 {
            return Err(SimilarityError::Domain(format!(
                "similarity grid needs at least 8 nodes, got {}",
                grid.n_points
            )));
        }
        if grid.r_max <= 1.0 {
            return Err(SimilarityError::Domain(format!(
                "xi_max = {} must exceed 1",
                grid.r_max
            )));
        }
        let phi = profile_state(&grid, d)?.u;
        let n = d + 2;
        let potential = grid.nodes.iter().map(|&x| potential_V(x, n)).collect();
        Ok(Self {
            ctx: NonlinearityContext::new(n),
            grid,
            d,
            n,
            phi,
            potential,
        })
    }

    pub fn len(&self) -> usize {
        self.grid.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.grid.n_points == 0
    }

    /// Upwind limit `h/(ξ_max + 1)`.
    pub fn max_dtau(&self) -> f64 {
        self.grid.h / (self.grid.r_max + 1.0)
    }

    pub fn default_dtau(&self) -> f64 {
        0.8 * self.max_dtau()
    }

    /// `L₀ X`.
    pub fn apply_l0(&self, x: &StatePair) -> StatePair {
        let m = self.grid.n_points;
        let h = self.grid.h;
        let eu = extend(&x.u, Closure::Extrapolate).expect("grid has at least 8 nodes");
        let ev = extend(&x.u_hat, Closure::Extrapolate).expect("grid has at least 8 nodes");
        let c2 = 1.0 / (12.0 * h * h);
        let c1 = 1.0 / (12.0 * h);
        let cu = 1.0 / (6.0 * h);
        let k = (self.n - 1) as f64;
        let mut out = StatePair::zeros(m);
        for j in 0..m {
            let xi = self.grid.nodes[j];
            let (a, b, c, d, e) = (eu[j], eu[j + 1], eu[j + 2], eu[j + 3], eu[j + 4]);
            let d2 = (-e + 16.0 * d - 30.0 * c + 16.0 * b - a) * c2;
            let d1 = (-e + 8.0 * d - 8.0 * b + a) * c1;
            let up_u = (2.0 * d + 3.0 * c - 6.0 * b + a) * cu;
            let up_v = (2.0 * ev[j + 3] + 3.0 * ev[j + 2] - 6.0 * ev[j + 1] + ev[j]) * cu;
            out.u[j] = -c - xi * up_u + x.u_hat[j];
            out.u_hat[j] = d2 + k / xi * d1 - 2.0 * x.u_hat[j] - xi * up_v;
        }
        out
    }

    /// `L X = L₀X + (0, V X₁)`.
    pub fn apply_l(&self, x: &StatePair) -> StatePair {
        let mut out = self.apply_l0(x);
        for ((o, v), u) in out.u_hat.iter_mut().zip(&self.potential).zip(&x.u) {
            *o += v * u;
        }
        out
    }

    pub fn rhs(&self, tau: f64, x: &StatePair, dynamics: Dynamics<'_>) -> StatePair {
        match dynamics {
            Dynamics::Full => {
                let mut out = self.apply_l0(x);
                let mut nl = vec![0.0; x.len()];
                n0_into(&x.u, &self.grid.nodes, &self.ctx, &mut nl);
                out.u_hat.iter_mut().zip(&nl).for_each(|(o, v)| *o += v);
                out
            }
            Dynamics::Linearized => self.apply_l(x),
            Dynamics::Forced(z) => {
                let zt = z(tau);
                let mut out = self.apply_l(x);
                for j in 0..x.len() {
                    let k = x.u[j] + zt.u[j];
                    let xi = self.grid.nodes[j];
                    out.u_hat[j] +=
                        n_remainder_at(xi, self.phi[j], k, &self.ctx) + self.potential[j] * zt.u[j];
                }
                out
            }
        }
    }

    /// Step count and step for a span, honouring the upwind limit.
    pub fn plan(&self, tau_span: f64, dtau: Option<f64>) -> Result<(usize, f64)> {
        if !(tau_span >= 0.0 && tau_span.is_finite()) {
            return Err(SimilarityError::Domain(format!(
                "tau span must be >= 0, got {tau_span}"
            )));
        }
        let target = dtau.unwrap_or_else(|| self.default_dtau());
        if !(target > 0.0) || target > self.max_dtau() * (1.0 + 1e-12) {
            return Err(SimilarityError::Domain(format!(
                "dtau = {target} violates the upwind limit {}",
                self.max_dtau()
            )));
        }
        let steps = (tau_span / target).ceil() as usize;
        Ok((
            steps,
            if steps == 0 {
                0.0
            } else {
                tau_span / steps as f64
            },
        ))
    }

    pub fn evolve(
        &self,
        initial: &StatePair,
        tau_span: f64,
        dynamics: Dynamics<'_>,
        opts: EvolveOptions,
    ) -> Result<Trajectory> {
        self.grid.check(&initial.u)?;
        self.grid.check(&initial.u_hat)?;
        let (steps, dtau) = self.plan(tau_span, opts.dtau)?;
        let f = |tau: f64, x: &StatePair| self.rhs(tau, x, dynamics);
        let mut taus = vec![0.0];
        let mut states = vec![initial.clone()];
        let mut x = initial.clone();
        for i in 0..steps {
            let tau = i as f64 * dtau;
            x = rk4_step(&f, tau, &x, dtau);
            if !x.is_finite() {
                return Err(SimilarityError::Divergence { tau: tau + dtau });
            }
            let last = i + 1 == steps;
            if last || (opts.stride > 0 && (i + 1) % opts.stride == 0) {
                taus.push((i + 1) as f64 * dtau);
                states.push(x.clone());
            }
        }
        Ok(Trajectory { taus, states })
    }
}
