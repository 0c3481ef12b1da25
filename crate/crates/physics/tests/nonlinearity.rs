use corot_core::{RadialGrid, StatePair};
use corot_physics::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `γ(y)/y³ = ∫₀¹ 4 t² (sin(yt)/(yt))² dt`, a positive integrand with no cancellation.
fn gamma_over_cube_quadrature(y: f64) -> f64 {
    let m = 4000;
    let f = |t: f64| {
        let x = y * t;
        let s = if x == 0.0 { 1.0 } else { x.sin() / x };
        4.0 * t * t * s * s
    };
    let h = 1.0 / m as f64;
    let mut acc = f(0.0) + f(1.0);
    for i in 1..m {
        acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

fn profile(xi: f64) -> f64 {
    if xi == 0.0 {
        2.0
    } else {
        2.0 / xi * xi.atan()
    }
}

#[test]
fn series_branch_matches_quadrature() {
    for y in [1e-8, 1e-4, 0.01, 0.1, 0.2, 0.2499, 0.25, 0.3, 0.5] {
        let a = gamma_over_cube(y);
        let b = gamma_over_cube_quadrature(y);
        assert!((a - b).abs() < 1e-13, "y = {y}: {a} vs {b}");
    }
}

#[test]
fn branch_switch_is_continuous() {
    // below ~0.2 the direct formula itself loses digits to cancellation
    for t in [0.25, 0.5] {
        let below = gamma_over_cube_with(t * (1.0 - 1e-15), t);
        let above = gamma_over_cube_with(t, t);
        assert!((below - above).abs() < 5e-15, "{t}: {below} {above}");
    }
}

#[test]
fn remainder_matches_direct_subtraction() {
    let ctx = NonlinearityContext::new(5);
    let grid = RadialGrid::new(2.5, 160).unwrap();
    let phi = grid.sample(profile);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let k: Vec<f64> = (0..160).map(|_| rng.random_range(-0.3..0.3)).collect();
    let pert = N_perturbation(
        &StatePair::new(k.clone(), vec![0.0; 160]).unwrap(),
        &grid,
        &ctx,
        &phi,
    )
    .unwrap();
    assert!(pert.u.iter().all(|v| *v == 0.0));
    for (j, &xi) in grid.nodes.iter().enumerate() {
        let direct =
            n0_at(xi, phi[j] + k[j], &ctx) - n0_at(xi, phi[j], &ctx) - potential_V(xi, 5) * k[j];
        assert!((direct - pert.u_hat[j]).abs() < 1e-10, "node {j}");
    }
    let zero = N_perturbation(&StatePair::zeros(160), &grid, &ctx, &phi).unwrap();
    assert!(zero.u_hat.iter().all(|v| *v == 0.0));
}

#[test]
fn remainder_is_quadratic() {
    let ctx = NonlinearityContext::new(5);
    let grid = RadialGrid::new(2.5, 64).unwrap();
    let phi = grid.sample(profile);
    let k = StatePair::new(grid.sample(|x| (-x * x).exp() * (1.0 + x)), vec![0.0; 64]).unwrap();
    let ratios: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&e| {
            let n = N_perturbation(&k.scale(e), &grid, &ctx, &phi).unwrap();
            n.sup_norm() / (e * e)
        })
        .collect();
    assert!(ratios.iter().all(|r| *r < 50.0));
    assert!((ratios[1] / ratios[2] - 1.0).abs() < 0.05, "{ratios:?}");
}

#[test]
fn potential_is_derivative_of_n0_at_profile() {
    let ctx = NonlinearityContext::new(5);
    let eps = 1e-6;
    for xi in [1e-3, 0.1, 0.5, 1.0, 2.0, 4.0] {
        let p = profile(xi);
        let fd = (n0_at(xi, p + eps, &ctx) - n0_at(xi, p - eps, &ctx)) / (2.0 * eps);
        assert!((fd - potential_V(xi, 5)).abs() < 1e-6, "xi = {xi}");
    }
    // general dimension: Φ = (2/ξ) arctan(ξ/√(d-2))
    let ctx6 = NonlinearityContext::new(6);
    let a: f64 = 2.0;
    for xi in [0.2, 1.3, 3.0] {
        let p = 2.0 / xi * (xi / a.sqrt()).atan();
        let fd = (n0_at(xi, p + eps, &ctx6) - n0_at(xi, p - eps, &ctx6)) / (2.0 * eps);
        assert!((fd - potential_V(xi, 6)).abs() < 1e-6);
    }
}

#[test]
fn n0_is_lipschitz_on_bounded_sets() {
    // |∂_u n₀| = 2(n-3) u² (sin(ru)/(ru))² ≤ 2(n-3)·4 on ‖u‖∞ ≤ 2
    let ctx = NonlinearityContext::new(5);
    let grid = RadialGrid::new(3.0, 96).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let u: Vec<f64> = (0..96).map(|_| rng.random_range(-2.0..2.0)).collect();
        let v: Vec<f64> = (0..96).map(|_| rng.random_range(-2.0..2.0)).collect();
        let a = n0(&u, &grid, &ctx).unwrap();
        let b = n0(&v, &grid, &ctx).unwrap();
        let num = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let den = u
            .iter()
            .zip(&v)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        worst = worst.max(num / den);
    }
    assert!(worst <= 16.0, "{worst}");
}

proptest! {
    #[test]
    fn gamma_is_odd_and_gamma_prime_nonnegative(y in -20.0f64..20.0) {
        prop_assert_eq!(gamma(-y), -gamma(y));
        prop_assert!(gamma_prime(y) >= 0.0);
        prop_assert!((gamma_prime(y) - (2.0 - 2.0 * (2.0 * y).cos())).abs() < 1e-14);
    }

    #[test]
    fn n0_vanishes_only_with_u(r in 0.0f64..5.0, u in -10.0f64..10.0) {
        let ctx = NonlinearityContext::new(5);
        let v = n0_at(r, u, &ctx);
        prop_assert!(v.is_finite());
        prop_assert!(v * u >= 0.0);
    }
}
