use crate::{CoreError, Result};

/// Uniform cell-centered radial grid on `[0, r_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    pub r_max: f64,
    pub n_points: usize,
    pub h: f64,
    pub nodes: Vec<f64>,
}

impl RadialGrid {
    pub fn new(r_max: f64, n_points: usize) -> Result<Self> {
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(CoreError::Grid(format!(
                "r_max must be positive, got {r_max}"
            )));
        }
        if n_points < 2 {
            return Err(CoreError::Grid(format!(
                "need at least 2 nodes, got {n_points}"
            )));
        }
        let h = r_max / n_points as f64;
        let nodes = (0..n_points).map(|j| (j as f64 + 0.5) * h).collect();
        Ok(Self {
            r_max,
            n_points,
            h,
            nodes,
        })
    }

    /// Grid with spacing `h` covering at least `r_max`.
    pub fn with_spacing(r_max: f64, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(CoreError::Grid(format!(
                "spacing must be positive, got {h}"
            )));
        }
        let n_points = (r_max / h).round() as usize;
        Self::new(n_points as f64 * h, n_points)
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    /// Cell faces `r_{j-1/2} = j h`, `j = 0..=n_points`.
    pub fn faces(&self) -> Vec<f64> {
        (0..=self.n_points).map(|j| j as f64 * self.h).collect()
    }

    /// Quadrature weights: exact radial cell volumes `(r_{j+1/2}^n - r_{j-1/2}^n)/n`
    /// (the sphere area is left out).
    pub fn weights(&self, n: usize) -> Vec<f64> {
        let nf = n as f64;
        (0..self.n_points)
            .map(|j| {
                let a = j as f64 * self.h;
                let b = (j + 1) as f64 * self.h;
                (b.powi(n as i32) - a.powi(n as i32)) / nf
            })
            .collect()
    }

    pub fn inner(&self, f: &[f64], g: &[f64], n: usize) -> Result<f64> {
        self.check(f)?;
        self.check(g)?;
        Ok(self
            .weights(n)
            .iter()
            .zip(f)
            .zip(g)
            .map(|((w, a), b)| w * a * b)
            .sum())
    }

    pub fn check(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.n_points {
            return Err(CoreError::Shape {
                expected: self.n_points,
                got: f.len(),
            });
        }
        Ok(())
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.nodes.iter().map(|&r| f(r)).collect()
    }
}

/// Field and velocity samples `(u, u_hat)` on one grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StatePair {
    pub u: Vec<f64>,
    pub u_hat: Vec<f64>,
}

impl StatePair {
    pub fn new(u: Vec<f64>, u_hat: Vec<f64>) -> Result<Self> {
        if u.len() != u_hat.len() {
            return Err(CoreError::Shape {
                expected: u.len(),
                got: u_hat.len(),
            });
        }
        Ok(Self { u, u_hat })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            u: vec![0.0; len],
            u_hat: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.u_hat).all(|v| v.is_finite())
    }

    pub fn sup_norm(&self) -> f64 {
        self.u
            .iter()
            .chain(&self.u_hat)
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self + a * other`
    pub fn axpy(&self, a: f64, other: &StatePair) -> StatePair {
        StatePair {
            u: self
                .u
                .iter()
                .zip(&other.u)
                .map(|(x, y)| x + a * y)
                .collect(),
            u_hat: self
                .u_hat
                .iter()
                .zip(&other.u_hat)
                .map(|(x, y)| x + a * y)
                .collect(),
        }
    }

    pub fn scale(&self, a: f64) -> StatePair {
        StatePair {
            u: self.u.iter().map(|x| a * x).collect(),
            u_hat: self.u_hat.iter().map(|x| a * x).collect(),
        }
    }

    /// Stacked `[u; u_hat]`.
    pub fn to_stacked(&self) -> Vec<f64> {
        let mut v = self.u.clone();
        v.extend_from_slice(&self.u_hat);
        v
    }

    pub fn from_stacked(v: &[f64]) -> StatePair {
        let m = v.len() / 2;
        StatePair {
            u: v[..m].to_vec(),
            u_hat: v[m..].to_vec(),
        }
    }
}

/// How the two ghost cells beyond `r_max` are filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Closure {
    /// Odd reflection about `r_max` (homogeneous Dirichlet).
    Dirichlet,
    /// Quartic extrapolation from the last four nodes; imposes nothing.
    Extrapolate,
}

/// `f` padded with two ghosts on each side: even reflection at the origin and
/// the requested closure at `r_max`. Index `j + 2` holds `f[j]`.
pub fn extend(f: &[f64], closure: Closure) -> Result<Vec<f64>> {
    let m = f.len();
    if m < 4 {
        return Err(CoreError::Shape {
            expected: 4,
            got: m,
        });
    }
    let (g1, g2) = match closure {
        Closure::Dirichlet => (-f[m - 1], -f[m - 2]),
        Closure::Extrapolate => {
            let g1 = 4.0 * f[m - 1] - 6.0 * f[m - 2] + 4.0 * f[m - 3] - f[m - 4];
            let g2 = 4.0 * g1 - 6.0 * f[m - 1] + 4.0 * f[m - 2] - f[m - 3];
            (g1, g2)
        }
    };
    let mut e = Vec::with_capacity(m + 4);
    e.push(f[1]);
    e.push(f[0]);
    e.extend_from_slice(f);
    e.push(g1);
    e.push(g2);
    Ok(e)
}

fn check_dim(n: usize) -> Result<()> {
    if n < 5 {
        return Err(CoreError::Dimension(n));
    }
    Ok(())
}

/// Face coefficients `c_j` (flux = `c_j (f_j - f_{j-1})`) and cell volumes of the
/// conservative stencil. `c[0] = 0` (origin), `c[N]` is the half-cell Dirichlet face.
pub(crate) fn fv_coefficients(grid: &RadialGrid, n: usize) -> (Vec<f64>, Vec<f64>) {
    let m = grid.n_points;
    let h = grid.h;
    let p = (n - 1) as i32;
    let mut c = vec![0.0; m + 1];
    for (j, cj) in c.iter_mut().enumerate().take(m).skip(1) {
        *cj = (j as f64 * h).powi(p) / h;
    }
    c[m] = grid.r_max.powi(p) / (0.5 * h);
    (c, grid.weights(n))
}

/// Conservative second-order radial Laplacian `r^{1-n} (r^{n-1} f')'`.
///
/// Even reflection at the origin (zero flux through `r = 0`), homogeneous
/// Dirichlet at `r_max` imposed half a cell beyond the last node.
pub fn laplacian_apply(f: &[f64], grid: &RadialGrid, n: usize) -> Result<Vec<f64>> {
    let op = ConservativeLaplacian::new(grid, n)?;
    grid.check(f)?;
    let mut out = vec![0.0; grid.n_points];
    op.apply_into(f, &mut out);
    Ok(out)
}

/// Precomputed face coefficients of [`laplacian_apply`] for repeated use.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservativeLaplacian {
    /// `c[j]` multiplies `f_j - f_{j-1}`; `c[0] = 0`, `c[N]` is the wall face.
    pub coefficients: Vec<f64>,
    pub volumes: Vec<f64>,
}

impl ConservativeLaplacian {
    pub fn new(grid: &RadialGrid, n: usize) -> Result<Self> {
        check_dim(n)?;
        let (coefficients, volumes) = fv_coefficients(grid, n);
        Ok(Self {
            coefficients,
            volumes,
        })
    }

    /// `out = Δ_h f`; both slices have the grid length.
    pub fn apply_into(&self, f: &[f64], out: &mut [f64]) {
        let m = self.volumes.len();
        let c = &self.coefficients;
        let mut flux_in = 0.0;
        for j in 0..m {
            let next = if j + 1 < m { f[j + 1] } else { 0.0 };
            let flux_out = c[j + 1] * (next - f[j]);
            out[j] = (flux_out - flux_in) / self.volumes[j];
            flux_in = flux_out;
        }
    }
}

/// Fourth-order centered radial Laplacian `f'' + (n-1)/r f'` on the
/// five-point stencil, with the ghosts supplied by [`extend`].
pub fn laplacian_apply_high_order(
    f: &[f64],
    grid: &RadialGrid,
    n: usize,
    closure: Closure,
) -> Result<Vec<f64>> {
    check_dim(n)?;
    grid.check(f)?;
    let e = extend(f, closure)?;
    let h = grid.h;
    let c2 = 1.0 / (12.0 * h * h);
    let c1 = 1.0 / (12.0 * h);
    let k = (n - 1) as f64;
    Ok((0..grid.n_points)
        .map(|j| {
            let (a, b, x, d, g) = (e[j], e[j + 1], e[j + 2], e[j + 3], e[j + 4]);
            let d2 = (-g + 16.0 * d - 30.0 * x + 16.0 * b - a) * c2;
            let d1 = (-g + 8.0 * d - 8.0 * b + a) * c1;
            d2 + k / grid.nodes[j] * d1
        })
        .collect())
}

/// Cubic Lagrange interpolation of grid samples at radius `r`.
pub fn sample_cubic(f: &[f64], grid: &RadialGrid, closure: Closure, r: f64) -> Result<f64> {
    grid.check(f)?;
    let e = extend(f, closure)?;
    sample_extended(&e, grid.h, grid.n_points, r)
}

/// Same as [`sample_cubic`] on an already extended array (see [`extend`]).
pub(crate) fn sample_extended(e: &[f64], h: f64, m: usize, r: f64) -> Result<f64> {
    let r = r.abs();
    let p = r / h - 0.5;
    if !(p.is_finite() && p <= m as f64) {
        return Err(CoreError::Domain(format!(
            "radius {r} outside the grid (r_max = {})",
            m as f64 * h
        )));
    }
    // stencil nodes i-1..i+2 in node-index coordinates; ghosts make i >= -1 valid
    let i = (p.floor() as i64).clamp(-1, m as i64 - 1);
    let s = p - i as f64;
    let at = |k: i64| e[(k + 2) as usize];
    let (f0, f1, f2, f3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
    let w0 = -s * (s - 1.0) * (s - 2.0) / 6.0;
    let w1 = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
    let w2 = -(s + 1.0) * s * (s - 2.0) / 2.0;
    let w3 = (s + 1.0) * s * (s - 1.0) / 6.0;
    Ok(w0 * f0 + w1 * f1 + w2 * f2 + w3 * f3)
}

/// Interpolate `f` at many radii at once.
pub fn sample_cubic_many(
    f: &[f64],
    grid: &RadialGrid,
    closure: Closure,
    radii: &[f64],
) -> Result<Vec<f64>> {
    grid.check(f)?;
    let e = extend(f, closure)?;
    radii
        .iter()
        .map(|&r| sample_extended(&e, grid.h, grid.n_points, r))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_layout() {
        let g = RadialGrid::new(2.0, 8).unwrap();
        assert_eq!(g.h, 0.25);
        assert_eq!(g.nodes[0], 0.125);
        assert_eq!(*g.nodes.last().unwrap(), 2.0 - 0.125);
        assert!(g.nodes.windows(2).all(|w| w[1] > w[0]));
        assert!(RadialGrid::new(0.0, 8).is_err());
        assert!(RadialGrid::new(1.0, 1).is_err());
    }

    #[test]
    fn weights_sum_to_ball_volume() {
        let g = RadialGrid::new(3.0, 40).unwrap();
        let total: f64 = g.weights(5).iter().sum();
        assert!((total - 3f64.powi(5) / 5.0).abs() < 1e-10);
    }

    #[test]
    fn constants_are_harmonic_away_from_the_wall() {
        let g = RadialGrid::new(1.0, 64).unwrap();
        let lap = laplacian_apply(&vec![3.0; 64], &g, 5).unwrap();
        assert!(lap[..63].iter().all(|v| v.abs() < 1e-9));
        assert!(lap[63] < 0.0);
    }

    #[test]
    fn r_squared() {
        let g = RadialGrid::new(1.0, 64).unwrap();
        let f = g.sample(|r| r * r);
        let lap = laplacian_apply(&f, &g, 5).unwrap();
        for v in &lap[..63] {
            assert!((v - 10.0).abs() < 1e-9, "{v}");
        }
        let lap4 = laplacian_apply_high_order(&f, &g, 5, Closure::Extrapolate).unwrap();
        for v in &lap4 {
            assert!((v - 10.0).abs() < 1e-8, "{v}");
        }
    }

    #[test]
    fn shape_errors() {
        let g = RadialGrid::new(1.0, 16).unwrap();
        assert!(matches!(
            laplacian_apply(&[0.0; 3], &g, 5),
            Err(CoreError::Shape { .. })
        ));
        assert!(matches!(
            laplacian_apply(&[0.0; 16], &g, 3),
            Err(CoreError::Dimension(3))
        ));
    }

    #[test]
    fn cubic_sampling_is_exact_on_even_cubics_and_at_nodes() {
        let g = RadialGrid::new(2.0, 32).unwrap();
        let f = g.sample(|r| 1.0 + r * r);
        for r in [0.0, 0.01, 0.3, 1.234, 1.9] {
            let v = sample_cubic(&f, &g, Closure::Extrapolate, r).unwrap();
            assert!((v - (1.0 + r * r)).abs() < 1e-12);
        }
        for (j, &r) in g.nodes.iter().enumerate() {
            assert_eq!(sample_cubic(&f, &g, Closure::Dirichlet, r).unwrap(), f[j]);
        }
        assert!(sample_cubic(&f, &g, Closure::Dirichlet, 2.5).is_err());
    }
}
