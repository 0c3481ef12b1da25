//! The explicit blowup solution `u_T(t, r) = Φ(r/(T-t))/(T-t)` with
//! `Φ(ρ) = (2/ρ) arctan(ρ/√(d-2))`, and the gauge mode `g(ξ) = 1/(ξ² + n - 4)`
//! generated by shifting the blowup time.

use corot_core::{
    laplacian_apply, laplacian_apply_high_order, Closure, CoreError, RadialGrid, StatePair,
};
use corot_physics::{n0, NonlinearityContext};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileParams {
    pub d: usize,
    pub n: usize,
    pub t_blowup: f64,
}

impl ProfileParams {
    pub fn new(d: usize, t_blowup: f64) -> Result<Self, CoreError> {
        check_d(d)?;
        if !(t_blowup > 0.0 && t_blowup.is_finite()) {
            return Err(CoreError::Domain(format!(
                "blowup time must be positive, got {t_blowup}"
            )));
        }
        Ok(Self {
            d,
            n: d + 2,
            t_blowup,
        })
    }
}

fn check_d(d: usize) -> Result<(), CoreError> {
    if d < 3 {
        return Err(CoreError::Domain(format!("target dimension d = {d} < 3")));
    }
    Ok(())
}

/// `Φ(ρ) = (2/ρ) arctan(ρ/√(d-2))`, `Φ(0) = 2/√(d-2)`.
pub fn phi(rho: f64, d: usize) -> Result<f64, CoreError> {
    check_d(d)?;
    Ok(phi_unchecked(rho.abs(), (d - 2) as f64))
}

fn phi_unchecked(rho: f64, a: f64) -> f64 {
    let sa = a.sqrt();
    if rho < 1e-8 {
        // next term is O(ρ²/a)
        return 2.0 / sa * (1.0 - rho * rho / (3.0 * a));
    }
    2.0 / rho * (rho / sa).atan()
}

/// `Φ̂ = (ρΦ)' = 2√(d-2)/(d-2+ρ²)`.
pub fn phi_hat(rho: f64, d: usize) -> Result<f64, CoreError> {
    check_d(d)?;
    let a = (d - 2) as f64;
    Ok(2.0 * a.sqrt() / (a + rho * rho))
}

/// `2Φ̂ + ρΦ̂' = 4a√a/(a+ρ²)²` with `a = d-2`: the value of `∂_t² u_T` at `T - t = 1`.
pub fn phi_accel(rho: f64, d: usize) -> Result<f64, CoreError> {
    check_d(d)?;
    let a = (d - 2) as f64;
    let q = a + rho * rho;
    Ok(4.0 * a * a.sqrt() / (q * q))
}

/// `(u_T, ∂_t u_T)` at `(t, r)`.
pub fn u_t(t: f64, r: f64, params: &ProfileParams) -> Result<(f64, f64), CoreError> {
    let s = params.t_blowup - t;
    if !(s > 0.0) {
        return Err(CoreError::Domain(format!(
            "t = {t} is not before the blowup time {}",
            params.t_blowup
        )));
    }
    let rho = r / s;
    Ok((phi(rho, params.d)? / s, phi_hat(rho, params.d)? / (s * s)))
}

/// `(g, ξg' + 2g) = (1/(ξ²+n-4), 2(n-4)/(ξ²+n-4)²)`.
pub fn gauge_mode(xi: f64, n: usize) -> (f64, f64) {
    let a = n as f64 - 4.0;
    let q = xi * xi + a;
    (1.0 / q, 2.0 * a / (q * q))
}

/// `u_T(t, ·)` sampled on a grid.
pub fn self_similar_state(
    grid: &RadialGrid,
    params: &ProfileParams,
    t: f64,
) -> Result<StatePair, CoreError> {
    let mut u = Vec::with_capacity(grid.n_points);
    let mut v = Vec::with_capacity(grid.n_points);
    for &r in &grid.nodes {
        let (a, b) = u_t(t, r, params)?;
        u.push(a);
        v.push(b);
    }
    Ok(StatePair { u, u_hat: v })
}

/// `(Φ, Φ̂)` on a similarity grid.
pub fn profile_state(grid: &RadialGrid, d: usize) -> Result<StatePair, CoreError> {
    check_d(d)?;
    let a = (d - 2) as f64;
    Ok(StatePair {
        u: grid.nodes.iter().map(|&x| phi_unchecked(x, a)).collect(),
        u_hat: grid
            .nodes
            .iter()
            .map(|&x| 2.0 * a.sqrt() / (a + x * x))
            .collect(),
    })
}

/// `(g, ĝ)` on a similarity grid.
pub fn gauge_state(grid: &RadialGrid, n: usize) -> StatePair {
    let (u, u_hat) = grid.nodes.iter().map(|&x| gauge_mode(x, n)).unzip();
    StatePair { u, u_hat }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stencil {
    /// The conservative second-order Laplacian used by the physical solver.
    Conservative,
    /// The fourth-order centered Laplacian used in the similarity frame.
    HighOrder,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualNorms {
    pub max: f64,
    /// Weighted `L²` over the evaluated nodes.
    pub l2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileResidual {
    pub high_order: ResidualNorms,
    pub conservative: ResidualNorms,
}

/// Residual of `u_T` at `T - t = 1` in `u_tt - Δu = n₀(u)`, over the nodes with
/// `r ≤ r_eval`, for both discrete Laplacians.
pub fn profile_residual(
    grid: &RadialGrid,
    d: usize,
    r_eval: f64,
) -> Result<ProfileResidual, CoreError> {
    Ok(ProfileResidual {
        high_order: scaled_profile_residual(grid, d, 1.0, r_eval, Stencil::HighOrder)?,
        conservative: scaled_profile_residual(grid, d, 1.0, r_eval, Stencil::Conservative)?,
    })
}

/// Same residual for the candidate `c·Φ` with acceleration `c·(2Φ̂ + ρΦ̂')`.
/// `c = 0` gives the zero function; `c ≠ 1` is not a solution.
pub fn scaled_profile_residual(
    grid: &RadialGrid,
    d: usize,
    scale: f64,
    r_eval: f64,
    stencil: Stencil,
) -> Result<ResidualNorms, CoreError> {
    check_d(d)?;
    let n = d + 2;
    if r_eval > grid.r_max - 3.0 * grid.h {
        return Err(CoreError::Domain(format!(
            "r_eval = {r_eval} too close to r_max = {}",
            grid.r_max
        )));
    }
    let u: Vec<f64> = profile_state(grid, d)?
        .u
        .iter()
        .map(|v| scale * v)
        .collect();
    let lap = match stencil {
        Stencil::Conservative => laplacian_apply(&u, grid, n)?,
        Stencil::HighOrder => laplacian_apply_high_order(&u, grid, n, Closure::Extrapolate)?,
    };
    let nl = n0(&u, grid, &NonlinearityContext::new(n))?;
    let w = grid.weights(n);
    let mut max = 0.0f64;
    let mut l2 = 0.0;
    for j in 0..grid.n_points {
        let r = grid.nodes[j];
        if r > r_eval {
            break;
        }
        let res = scale * phi_accel(r, d)? - lap[j] - nl[j];
        max = max.max(res.abs());
        l2 += w[j] * res * res;
    }
    Ok(ResidualNorms { max, l2: l2.sqrt() })
}
