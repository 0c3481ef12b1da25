use crate::grid::fv_coefficients;
use crate::{RadialGrid, Result, StatePair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnergyKind {
    /// `½∫(û² + u_r²) r^{n-1} dr`, nonnegative.
    #[default]
    Flat,
    /// Flat energy minus the potential of the nonlinearity,
    /// `∫ (n-3)/(2r⁴) ((ru)² - sin²(ru)) r^{n-1} dr`. Conserved by the
    /// nonlinear flow; can be negative.
    Geometric,
}

/// Flat radial energy, see [`EnergyKind::Flat`].
pub fn energy(state: &StatePair, grid: &RadialGrid, n: usize) -> Result<f64> {
    energy_with(state, grid, n, EnergyKind::Flat)
}

/// Discrete energy matching the conservative stencil: the gradient part is
/// exactly `½⟨u, -Δ_h u⟩_w`.
pub fn energy_with(
    state: &StatePair,
    grid: &RadialGrid,
    n: usize,
    kind: EnergyKind,
) -> Result<f64> {
    grid.check(&state.u)?;
    grid.check(&state.u_hat)?;
    let (c, vol) = fv_coefficients(grid, n);
    let m = grid.n_points;
    let kinetic: f64 = state.u_hat.iter().zip(&vol).map(|(v, w)| w * v * v).sum();
    let mut gradient = 0.0;
    for j in 0..m {
        let next = if j + 1 < m { state.u[j + 1] } else { 0.0 };
        let d = next - state.u[j];
        gradient += c[j + 1] * d * d;
    }
    let mut e = 0.5 * (kinetic + gradient);
    if kind == EnergyKind::Geometric {
        let k = (n as f64 - 3.0) / 2.0;
        let pot: f64 = grid
            .nodes
            .iter()
            .zip(&state.u)
            .zip(&vol)
            .map(|((&r, &u), w)| w * k * u.powi(4) * quartic_deficit(r * u))
            .sum();
        e -= pot;
    }
    Ok(e)
}

/// `(y² - sin²y)/y⁴`, with a series near zero.
fn quartic_deficit(y: f64) -> f64 {
    if y.abs() > 0.25 {
        let s = y.sin();
        return (y * y - s * s) / y.powi(4);
    }
    // Σ_{m≥2} (-1)^m 2^{2m-1} y^{2m-4} / (2m)!
    let y2 = y * y;
    let mut term = 8.0 / 24.0;
    let mut sum = term;
    for m in 3..12 {
        let m = m as f64;
        term *= -4.0 * y2 / ((2.0 * m - 1.0) * (2.0 * m));
        sum += term;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deficit_branches_agree() {
        let a = quartic_deficit(0.25 + 1e-12);
        let b = quartic_deficit(0.25 - 1e-12);
        assert!((a - b).abs() < 1e-13);
        assert!((quartic_deficit(1e-6) - 1.0 / 3.0).abs() < 1e-12);
    }
}
