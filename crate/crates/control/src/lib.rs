//! Approximate controllability of the translated equation.
//!
//! Given data `u₀` and a target `u₁`, [`steering_state`] builds a trajectory
//! `u(t)` that matches both endpoints (cubic Hermite in time, regularized by
//! the heat semigroup of `Δ - I`), [`forcing_from_state`] extracts the forcing
//! `f` that makes `u` a solution, and [`z_from_forcing`] turns `f` into the
//! control `z` with `z_tt - Δz = ∂_t f`, `z(0) = ẑ(0) = 0`. Then `w = u - z`
//! solves the translated equation from `u₀` and `w(T₁) + z(T₁) = u₁`;
//! [`verify_steering`] checks this with the split solver.

mod verify;

pub use verify::{verify_steering, ContinuityRow, SteeringOptions, SteeringReport};

use corot_core::{ConservativeLaplacian, CoreError, ModalBasis, StatePair};
use corot_noise::NoiseError;
use corot_physics::{n0_at, NonlinearityContext};
use corot_solver::SolverError;
use nalgebra::DMatrix;

#[derive(Debug, thiserror::Error)]
pub enum ControlError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("invalid steering problem: {0}")]
    Problem(String),
}

pub type Result<T> = std::result::Result<T, ControlError>;

#[derive(Debug, Clone, PartialEq)]
pub struct SteeringProblem {
    pub u0: StatePair,
    pub u1: StatePair,
    pub t1: f64,
}

impl SteeringProblem {
    pub fn new(u0: StatePair, u1: StatePair, t1: f64) -> Result<Self> {
        if !(t1 > 0.0 && t1.is_finite()) {
            return Err(ControlError::Problem(format!(
                "horizon T1 = {t1} must be positive"
            )));
        }
        if u0.len() != u1.len() {
            return Err(ControlError::Problem(format!(
                "endpoints have {} and {} nodes",
                u0.len(),
                u1.len()
            )));
        }
        if !(u0.is_finite() && u1.is_finite()) {
            return Err(ControlError::Problem("endpoints must be finite".into()));
        }
        Ok(Self { u0, u1, t1 })
    }

    fn check(&self, basis: &ModalBasis) -> Result<()> {
        for v in [&self.u0.u, &self.u0.u_hat, &self.u1.u, &self.u1.u_hat] {
            basis.grid.check(v)?;
        }
        Ok(())
    }
}

/// States at `t_i = i·dt`, `i = 0..=steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<StatePair>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn t_final(&self) -> f64 {
        self.dt * self.steps() as f64
    }
}

/// Time weights of one mode on the unit interval, `a = 1 + λ`.
///
/// `u(s) = H₀u₀ + H₁u₁ + B₀v₀ + B₁v₁` with `v = T₁û`, where `B₀` carries the
/// regularized initial velocity and `B₁(s) = -B₀(1-s)` the final one. Returns
/// the values and `s`-derivatives `[H₀, H₁, B₀, B₁]`.
pub fn steering_weights(a: f64, s: f64) -> ([f64; 4], [f64; 4]) {
    let r = 1.0 / a;
    let c0 = r - r * r + r * r * (-a).exp();
    let h1 = |s: f64| s * s * (3.0 - 2.0 * s);
    let dh1 = |s: f64| 6.0 * s * (1.0 - s);
    let b0 = |s: f64| {
        let e = (-a * s).exp();
        -h1(s) * c0 - r * ((1.0 - s) * e - 1.0 - r * e + r)
    };
    let db0 = |s: f64| -dh1(s) * c0 + (1.0 - s) * (-a * s).exp();
    (
        [1.0 - h1(s), h1(s), b0(s), -b0(1.0 - s)],
        [-dh1(s), dh1(s), db0(s), db0(1.0 - s)],
    )
}

/// Steering trajectory on `[0, T₁]` with `steps` uniform steps.
///
/// Every operator in the construction is diagonal in the modal basis, so the
/// four endpoint identities hold up to the round-off of one projection and
/// synthesis.
pub fn steering_state(
    problem: &SteeringProblem,
    basis: &ModalBasis,
    steps: usize,
) -> Result<Trajectory> {
    problem.check(basis)?;
    if steps == 0 {
        return Err(ControlError::Problem("need at least one step".into()));
    }
    let t1 = problem.t1;
    let coef = [
        basis.project(&problem.u0.u)?,
        basis.project(&problem.u1.u)?,
        basis.project(&problem.u0.u_hat)?,
        basis.project(&problem.u1.u_hat)?,
    ];
    let m = basis.len();
    let mut a = DMatrix::zeros(m, steps + 1);
    let mut b = DMatrix::zeros(m, steps + 1);
    for i in 0..=steps {
        let s = i as f64 / steps as f64;
        for k in 0..m {
            let (w, dw) = steering_weights(1.0 + basis.eigenvalues[k], s);
            let (u0, u1, v0, v1) = (coef[0][k], coef[1][k], t1 * coef[2][k], t1 * coef[3][k]);
            a[(k, i)] = w[0] * u0 + w[1] * u1 + w[2] * v0 + w[3] * v1;
            b[(k, i)] = (dw[0] * u0 + dw[1] * u1 + dw[2] * v0 + dw[3] * v1) / t1;
        }
    }
    let ua = &basis.eigenvectors * a;
    let ub = &basis.eigenvectors * b;
    let states = (0..=steps)
        .map(|i| StatePair {
            u: ua.column(i).iter().copied().collect(),
            u_hat: ub.column(i).iter().copied().collect(),
        })
        .collect();
    Ok(Trajectory {
        dt: t1 / steps as f64,
        states,
    })
}

/// Forcing samples `f(t_i)`, same spacing as the trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Forcing {
    pub dt: f64,
    pub samples: Vec<Vec<f64>>,
}

/// `f(t) = û(t) - û(0) - ∫₀ᵗ (Δu + n₀(u)) ds`, trapezoidal in time, with the
/// conservative Laplacian of dimension `d + 2`.
pub fn forcing_from_state(traj: &Trajectory, basis: &ModalBasis, d: usize) -> Result<Forcing> {
    let grid = &basis.grid;
    let n = d + 2;
    let lap = ConservativeLaplacian::new(grid, n)?;
    let ctx = NonlinearityContext::new(n);
    let len = grid.n_points;
    let rhs = |u: &[f64]| {
        let mut out = vec![0.0; len];
        lap.apply_into(u, &mut out);
        for (j, o) in out.iter_mut().enumerate() {
            *o += n0_at(grid.nodes[j], u[j], &ctx);
        }
        out
    };
    let mut integral = vec![0.0; len];
    let mut prev = rhs(&traj.states[0].u);
    let v0 = &traj.states[0].u_hat;
    let mut samples = Vec::with_capacity(traj.states.len());
    samples.push(vec![0.0; len]);
    for st in &traj.states[1..] {
        let cur = rhs(&st.u);
        for j in 0..len {
            integral[j] += 0.5 * traj.dt * (prev[j] + cur[j]);
        }
        samples.push(
            (0..len)
                .map(|j| st.u_hat[j] - v0[j] - integral[j])
                .collect(),
        );
        prev = cur;
    }
    Ok(Forcing {
        dt: traj.dt,
        samples,
    })
}

/// Control `z` with modal coefficients at every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Control {
    pub dt: f64,
    pub states: Vec<StatePair>,
    /// `z_coeffs[i][k]`, `z_dot_coeffs[i][k]`: mode `k` at `t_i`.
    pub z_coeffs: Vec<Vec<f64>>,
    pub z_dot_coeffs: Vec<Vec<f64>>,
}

/// Exact modal solution of `z_tt - Δz = ∂_t f` from rest with `f` linear
/// between samples (so `∂_t f` is constant on each step).
pub fn z_from_forcing(forcing: &Forcing, basis: &ModalBasis) -> Result<Control> {
    let dt = forcing.dt;
    let m = basis.len();
    if forcing.samples[0].iter().any(|v| *v != 0.0) {
        return Err(ControlError::Problem("forcing must vanish at t = 0".into()));
    }
    let coeffs: Vec<Vec<f64>> = forcing
        .samples
        .iter()
        .map(|f| basis.project(f))
        .collect::<std::result::Result<_, _>>()?;
    // per mode: cos, sin/ω, ω sin, (1 - cos)/ω²
    let rot: Vec<[f64; 4]> = basis
        .eigenvalues
        .iter()
        .map(|&l| {
            let w = l.sqrt();
            let y = w * dt;
            let half = if y == 0.0 {
                1.0
            } else {
                (0.5 * y).sin() / (0.5 * y)
            };
            [
                y.cos(),
                dt * corot_physics::sinc(y),
                w * y.sin(),
                0.5 * dt * dt * half * half,
            ]
        })
        .collect();
    let mut z = vec![0.0; m];
    let mut zd = vec![0.0; m];
    let mut z_coeffs = vec![z.clone()];
    let mut z_dot_coeffs = vec![zd.clone()];
    for i in 0..forcing.samples.len() - 1 {
        for k in 0..m {
            let g = (coeffs[i + 1][k] - coeffs[i][k]) / dt;
            let [c, s_w, w_s, one_c] = rot[k];
            let (a, b) = (z[k], zd[k]);
            z[k] = c * a + s_w * b + g * one_c;
            zd[k] = -w_s * a + c * b + g * s_w;
        }
        z_coeffs.push(z.clone());
        z_dot_coeffs.push(zd.clone());
    }
    let states = z_coeffs
        .iter()
        .zip(&z_dot_coeffs)
        .map(|(a, b)| {
            Ok(StatePair {
                u: basis.synthesize(a)?,
                u_hat: basis.synthesize(b)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Control {
        dt,
        states,
        z_coeffs,
        z_dot_coeffs,
    })
}
