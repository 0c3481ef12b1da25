//! The scalar nonlinearity `n₀(u) = (n-3)/(2r³) γ(ru)`, `γ(y) = 2y - sin 2y`,
//! its linearization `V` at the self-similar profile and the remainder `N`.
//!
//! Everything that divides by powers of `r` goes through `γ(y)/y³` and
//! `sin(x)/x`, which switch to power series for small arguments.

use corot_core::{CoreError, RadialGrid, StatePair};

pub const DEFAULT_TAYLOR_THRESHOLD: f64 = 0.25;

/// Number of series terms of `γ(y)/y³`; the first dropped term at `y = 0.5`
/// is below `1e-17` relative.
const GAMMA_TERMS: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearityContext {
    pub n: usize,
    pub taylor_threshold: f64,
}

impl NonlinearityContext {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            taylor_threshold: DEFAULT_TAYLOR_THRESHOLD,
        }
    }

    pub fn with_threshold(n: usize, taylor_threshold: f64) -> Result<Self, CoreError> {
        if !(taylor_threshold > 0.0 && taylor_threshold <= 0.5) {
            return Err(CoreError::Config(format!(
                "taylor_threshold must lie in (0, 0.5], got {taylor_threshold}"
            )));
        }
        if n < 5 {
            return Err(CoreError::Dimension(n));
        }
        Ok(Self {
            n,
            taylor_threshold,
        })
    }

    fn prefactor(&self) -> f64 {
        (self.n as f64 - 3.0) / 2.0
    }
}

pub fn gamma(y: f64) -> f64 {
    2.0 * y - (2.0 * y).sin()
}

pub fn gamma_prime(y: f64) -> f64 {
    // 2 - 2cos 2y without cancellation
    let s = y.sin();
    4.0 * s * s
}

pub fn gamma_ppp(y: f64) -> f64 {
    8.0 * (2.0 * y).cos()
}

/// `γ(y)/y³` with the branch at the default threshold.
pub fn gamma_over_cube(y: f64) -> f64 {
    gamma_over_cube_with(y, DEFAULT_TAYLOR_THRESHOLD)
}

pub fn gamma_over_cube_with(y: f64, threshold: f64) -> f64 {
    if y.abs() >= threshold {
        return gamma(y) / (y * y * y);
    }
    // Σ_{m≥1} (-1)^{m+1} 2^{2m+1} y^{2m-2} / (2m+1)!
    let y2 = y * y;
    let mut term = 8.0 / 6.0;
    let mut sum = term;
    for m in 2..=GAMMA_TERMS {
        let m = m as f64;
        term *= -4.0 * y2 / ((2.0 * m) * (2.0 * m + 1.0));
        sum += term;
    }
    sum
}

/// `sin(x)/x`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() >= 0.25 {
        return x.sin() / x;
    }
    let x2 = x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..8 {
        let m = m as f64;
        term *= -x2 / ((2.0 * m) * (2.0 * m + 1.0));
        sum += term;
    }
    sum
}

/// `n₀(u)` at a single radius; at `r = 0` the limit `(n-3)·(4/3)u³/2`.
pub fn n0_at(r: f64, u: f64, ctx: &NonlinearityContext) -> f64 {
    ctx.prefactor() * u * u * u * gamma_over_cube_with(r * u, ctx.taylor_threshold)
}

pub fn n0(u: &[f64], grid: &RadialGrid, ctx: &NonlinearityContext) -> Result<Vec<f64>, CoreError> {
    grid.check(u)?;
    Ok(grid
        .nodes
        .iter()
        .zip(u)
        .map(|(&r, &v)| n0_at(r, v, ctx))
        .collect())
}

/// `n₀(u)` into a preallocated buffer; no shape checks.
pub fn n0_into(u: &[f64], nodes: &[f64], ctx: &NonlinearityContext, out: &mut [f64]) {
    for ((o, &r), &v) in out.iter_mut().zip(nodes).zip(u) {
        *o = n0_at(r, v, ctx);
    }
}

/// `V(ξ) = 8(n-4)(n-3)/(ξ² + n - 4)²`, the derivative of `n₀` at the profile.
#[allow(non_snake_case)]
pub fn potential_V(xi: f64, n: usize) -> f64 {
    let a = n as f64 - 4.0;
    let d = xi * xi + a;
    8.0 * a * (n as f64 - 3.0) / (d * d)
}

/// Second component of `N(K)` at one node:
/// `(n-3)/(2ξ³) (γ(ξ(Φ+K)) - γ(ξΦ) - γ'(ξΦ) ξK)`.
///
/// Evaluated through `γ(a+b) - γ(a) - γ'(a)b = 2 sin 2a sin²b + cos 2a γ(b)`
/// so nothing cancels as `ξ → 0` or `K → 0`.
pub fn n_remainder_at(xi: f64, phi: f64, k: f64, ctx: &NonlinearityContext) -> f64 {
    let a = xi * phi;
    let b = xi * k;
    let sb = k * sinc(b);
    let sin2a_over_xi = 2.0 * phi * sinc(2.0 * a);
    let cubic = k * k * k * gamma_over_cube_with(b, ctx.taylor_threshold);
    ctx.prefactor() * (2.0 * sin2a_over_xi * sb * sb + (2.0 * a).cos() * cubic)
}

/// `N(K)` for a pair `K` on a similarity grid; first component is zero.
/// `phi` holds the profile samples on the same grid.
#[allow(non_snake_case)]
pub fn N_perturbation(
    k: &StatePair,
    grid: &RadialGrid,
    ctx: &NonlinearityContext,
    phi: &[f64],
) -> Result<StatePair, CoreError> {
    grid.check(&k.u)?;
    grid.check(phi)?;
    let second = grid
        .nodes
        .iter()
        .zip(&k.u)
        .zip(phi)
        .map(|((&xi, &kv), &p)| n_remainder_at(xi, p, kv, ctx))
        .collect();
    Ok(StatePair {
        u: vec![0.0; grid.n_points],
        u_hat: second,
    })
}
