use corot_control::{
    forcing_from_state, steering_state, steering_weights, verify_steering, z_from_forcing, Forcing,
    SteeringOptions, SteeringProblem, Trajectory,
};
use corot_core::{
    heat_semigroup_apply, helmholtz_solve, modal_decompose, ModalBasis, RadialGrid, StatePair,
};
use corot_solver::SolverConfig;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn basis(r_max: f64, h: f64) -> ModalBasis {
    modal_decompose(&RadialGrid::with_spacing(r_max, h).unwrap(), 5).unwrap()
}

fn gaussian(b: &ModalBasis, amp: f64, center: f64, width: f64) -> Vec<f64> {
    b.grid
        .sample(|r| amp * (-((r - center) / width).powi(2)).exp())
}

fn random_pair(b: &ModalBasis, rng: &mut ChaCha8Rng) -> StatePair {
    let mut field = || {
        let (a, c, w) = (
            rng.random_range(-0.2..0.2),
            rng.random_range(0.0..1.0),
            rng.random_range(0.15..0.4),
        );
        gaussian(b, a, c, w)
    };
    StatePair {
        u: field(),
        u_hat: field(),
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn weights_satisfy_the_hermite_conditions() {
    for a in [1.0, 3.7, 250.0, 1e6] {
        let (w0, d0) = steering_weights(a, 0.0);
        let (w1, d1) = steering_weights(a, 1.0);
        let expect_w0 = [1.0, 0.0, 0.0, 0.0];
        let expect_d0 = [0.0, 0.0, 1.0, 0.0];
        let expect_w1 = [0.0, 1.0, 0.0, 0.0];
        let expect_d1 = [0.0, 0.0, 0.0, 1.0];
        for i in 0..4 {
            assert!((w0[i] - expect_w0[i]).abs() < 1e-14, "a {a} w0 {w0:?}");
            assert!((d0[i] - expect_d0[i]).abs() < 1e-14, "a {a} d0 {d0:?}");
            assert!((w1[i] - expect_w1[i]).abs() < 1e-14, "a {a} w1 {w1:?}");
            assert!((d1[i] - expect_d1[i]).abs() < 1e-12, "a {a} d1 {d1:?}");
        }
    }
}

#[test]
fn weight_derivatives_match_finite_differences() {
    let e = 1e-6;
    for a in [1.0, 12.0] {
        for s in [0.1, 0.5, 0.93] {
            let (_, d) = steering_weights(a, s);
            let (p, _) = steering_weights(a, s + e);
            let (m, _) = steering_weights(a, s - e);
            for i in 0..4 {
                assert!(((p[i] - m[i]) / (2.0 * e) - d[i]).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn identical_endpoints_at_rest_are_matched() {
    let b = basis(1.0, 1.0 / 64.0);
    let u = StatePair {
        u: gaussian(&b, 0.1, 0.3, 0.2),
        u_hat: vec![0.0; b.grid.len()],
    };
    let p = SteeringProblem::new(u.clone(), u.clone(), 1.0).unwrap();
    let traj = steering_state(&p, &b, 40).unwrap();
    assert!(traj.states[0].axpy(-1.0, &u).sup_norm() < 1e-8);
    assert!(traj.states[40].axpy(-1.0, &u).sup_norm() < 1e-8);
}

#[test]
fn random_pairs_meet_all_four_endpoint_identities() {
    let b = basis(1.0, 1.0 / 64.0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for t1 in [0.5, 1.0, 2.3] {
        let (u0, u1) = (random_pair(&b, &mut rng), random_pair(&b, &mut rng));
        let p = SteeringProblem::new(u0.clone(), u1.clone(), t1).unwrap();
        let traj = steering_state(&p, &b, 37).unwrap();
        let last = &traj.states[37];
        assert!((traj.t_final() - t1).abs() < 1e-14);
        assert!(sup_diff(&traj.states[0].u, &u0.u) <= 1e-8);
        assert!(sup_diff(&traj.states[0].u_hat, &u0.u_hat) <= 1e-8);
        assert!(sup_diff(&last.u, &u1.u) <= 1e-8);
        assert!(sup_diff(&last.u_hat, &u1.u_hat) <= 1e-8);
    }
}

/// Operator form with `T₁ = 1`, built from the resolvents and the heat
/// semigroup, evaluated on a single mode.
fn operator_form(b: &ModalBasis, k: usize, c: [f64; 4], t: f64) -> f64 {
    let e = b.mode(k);
    let r1 = |f: &[f64]| helmholtz_solve(f, b, 1).unwrap();
    let r2 = |f: &[f64]| helmholtz_solve(f, b, 2).unwrap();
    let p = |f: &[f64], s: f64| heat_semigroup_apply(f, b, s).unwrap();
    let lin = |terms: &[(f64, &Vec<f64>)]| {
        let mut out = vec![0.0; e.len()];
        for (a, v) in terms {
            out.iter_mut().zip(v.iter()).for_each(|(o, x)| *o += a * x);
        }
        out
    };
    let h = t * t * (3.0 - 2.0 * t);
    let (r1e, r2e, r2p1) = (r1(&e), r2(&e), r2(&p(&e, 1.0)));
    let c0 = lin(&[(1.0, &r1e), (-1.0, &r2e), (1.0, &r2p1)]);
    let pt = p(&e, t);
    let inner0 = lin(&[(1.0 - t, &pt), (-1.0, &e), (-1.0, &r1(&pt)), (1.0, &r1e)]);
    let b0 = lin(&[(-h, &c0), (-1.0, &r1(&inner0))]);
    let pm = p(&e, 1.0 - t);
    let inner1 = lin(&[(t, &pm), (-1.0, &e), (-1.0, &r1(&pm)), (1.0, &r1e)]);
    let b1 = lin(&[(1.0 - h, &c0), (1.0, &r1(&inner1))]);
    let u = lin(&[
        (c[0] * (1.0 - h), &e),
        (c[1] * h, &e),
        (c[2], &b0),
        (c[3], &b1),
    ]);
    b.project(&u).unwrap()[k]
}

#[test]
fn single_mode_matches_the_operator_form() {
    let b = basis(1.0, 1.0 / 32.0);
    for k in [0, 3, 11] {
        let e = b.mode(k);
        let c = [0.3, -0.2, 0.7, 0.4];
        let pair = |x: f64, v: f64| StatePair {
            u: e.iter().map(|y| x * y).collect(),
            u_hat: e.iter().map(|y| v * y).collect(),
        };
        let p = SteeringProblem::new(pair(c[0], c[2]), pair(c[1], c[3]), 1.0).unwrap();
        let traj = steering_state(&p, &b, 10).unwrap();
        for i in [0, 3, 7, 10] {
            let got = b.project(&traj.states[i].u).unwrap()[k];
            let want = operator_form(&b, k, c, i as f64 / 10.0);
            assert!(
                (got - want).abs() <= 1e-12,
                "mode {k} step {i}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn forcing_starts_at_zero_and_vanishes_along_free_solutions() {
    let b = basis(1.0, 1.0 / 64.0);
    let zero = Trajectory {
        dt: 0.01,
        states: vec![StatePair::zeros(b.grid.len()); 11],
    };
    let f = forcing_from_state(&zero, &b, 3).unwrap();
    assert!(f.samples.iter().all(|s| s.iter().all(|v| *v == 0.0)));

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p =
        SteeringProblem::new(random_pair(&b, &mut rng), random_pair(&b, &mut rng), 1.0).unwrap();
    let traj = steering_state(&p, &b, 50).unwrap();
    let f = forcing_from_state(&traj, &b, 3).unwrap();
    assert!(f.samples[0].iter().all(|v| *v == 0.0));
}

#[test]
fn leapfrog_solutions_need_no_forcing() {
    // the kick-drift-kick velocity update is the trapezoidal rule, so a solver
    // trajectory of the free equation gives f = 0 up to round-off
    let b = basis(2.0, 1.0 / 64.0);
    let u0 = StatePair {
        u: gaussian(&b, 0.3, 0.0, 0.3),
        u_hat: gaussian(&b, 0.1, 0.5, 0.2),
    };
    let mut cfg = SolverConfig::new(b.grid.clone(), 3, 0.5);
    cfg.record_stride = 1;
    let solver = corot_solver::Solver::new(cfg, None, None).unwrap();
    let out = solver.solve_with_path(&u0, None).unwrap();
    let traj = Trajectory {
        dt: solver.dt(),
        states: out.snapshots.into_iter().map(|s| s.1).collect(),
    };
    let f = forcing_from_state(&traj, &b, 3).unwrap();
    let peak = f
        .samples
        .iter()
        .map(|s| s.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .fold(0.0, f64::max);
    assert!(peak < 1e-12, "{peak:e}");
}

#[test]
fn forcing_quadrature_converges_at_second_order() {
    let b = basis(1.0, 1.0 / 32.0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p =
        SteeringProblem::new(random_pair(&b, &mut rng), random_pair(&b, &mut rng), 1.0).unwrap();
    let at_half = |steps: usize| {
        let traj = steering_state(&p, &b, steps).unwrap();
        forcing_from_state(&traj, &b, 3).unwrap().samples[steps / 2].clone()
    };
    let (f1, f2, f4) = (at_half(40), at_half(80), at_half(160));
    let ratio = sup_diff(&f1, &f2) / sup_diff(&f2, &f4);
    assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn zero_forcing_gives_zero_control() {
    let b = basis(1.0, 1.0 / 32.0);
    let f = Forcing {
        dt: 0.05,
        samples: vec![vec![0.0; b.grid.len()]; 21],
    };
    let c = z_from_forcing(&f, &b).unwrap();
    assert!(c.states.iter().all(|s| s.sup_norm() == 0.0));
}

#[test]
fn ramp_forcing_matches_the_driven_oscillator() {
    let b = basis(1.0, 1.0 / 32.0);
    for k in [0, 5] {
        let e = b.mode(k);
        let dt = 0.01;
        let f = Forcing {
            dt,
            samples: (0..=100)
                .map(|i| e.iter().map(|x| i as f64 * dt * x).collect())
                .collect(),
        };
        let c = z_from_forcing(&f, &b).unwrap();
        let l = b.eigenvalues[k];
        let w = l.sqrt();
        for i in [1, 37, 100] {
            let t = i as f64 * dt;
            let (z, zd) = ((1.0 - (w * t).cos()) / l, (w * t).sin() / w);
            assert!((c.z_coeffs[i][k] - z).abs() <= 1e-8);
            assert!((c.z_dot_coeffs[i][k] - zd).abs() <= 1e-8);
            let others = c.z_coeffs[i].iter().enumerate().filter(|(j, _)| *j != k);
            assert!(others.map(|(_, v)| v.abs()).fold(0.0, f64::max) < 1e-10);
        }
    }
}

#[test]
fn control_solves_the_forced_wave_equation_to_second_order() {
    // f(t) = sin(3t) e_k, so z'' + λz = 3cos(3t), z(0) = z'(0) = 0
    let b = basis(1.0, 1.0 / 32.0);
    let k = 2;
    let e = b.mode(k);
    let l = b.eigenvalues[k];
    let w = l.sqrt();
    let exact = |t: f64| 3.0 * ((3.0 * t).cos() - (w * t).cos()) / (l - 9.0);
    let err = |steps: usize| {
        let dt = 1.0 / steps as f64;
        let f = Forcing {
            dt,
            samples: (0..=steps)
                .map(|i| e.iter().map(|x| (3.0 * i as f64 * dt).sin() * x).collect())
                .collect(),
        };
        let c = z_from_forcing(&f, &b).unwrap();
        (c.z_coeffs[steps][k] - exact(1.0)).abs()
    };
    let (e1, e2) = (err(50), err(100));
    assert!(e1 < 1e-3);
    assert!((3.5..4.5).contains(&(e1 / e2)), "{e1:e} {e2:e}");
}

#[test]
fn nonzero_initial_forcing_is_rejected() {
    let b = basis(1.0, 1.0 / 32.0);
    let f = Forcing {
        dt: 0.1,
        samples: vec![vec![1.0; b.grid.len()]; 3],
    };
    assert!(z_from_forcing(&f, &b).is_err());
}

#[test]
fn bad_problems_are_rejected() {
    let z = StatePair::zeros(4);
    assert!(SteeringProblem::new(z.clone(), z.clone(), 0.0).is_err());
    assert!(SteeringProblem::new(z.clone(), StatePair::zeros(5), 1.0).is_err());
    let mut nan = z.clone();
    nan.u[1] = f64::NAN;
    assert!(SteeringProblem::new(nan, z, 1.0).is_err());
}

#[test]
fn zero_problem_has_zero_endpoint_error() {
    let b = basis(1.0, 1.0 / 64.0);
    let z = StatePair::zeros(b.grid.len());
    let p = SteeringProblem::new(z.clone(), z, 1.0).unwrap();
    let cfg = SolverConfig::new(b.grid.clone(), 3, 1.0);
    let opts = SteeringOptions {
        perturbation_sizes: vec![],
        ..Default::default()
    };
    let r = verify_steering(&p, &b, &cfg, &opts).unwrap();
    assert_eq!(r.endpoint_error, Some(0.0));
    assert_eq!(r.control_sup, 0.0);
}

#[test]
fn gaussian_bumps_are_steered_to_within_1e3() {
    let b = basis(2.0, 1.0 / 256.0);
    let n = b.grid.len();
    let u0 = StatePair {
        u: gaussian(&b, 0.1, 0.0, 0.3),
        u_hat: vec![0.0; n],
    };
    let u1 = StatePair {
        u: gaussian(&b, 0.1, 0.5, 0.25),
        u_hat: gaussian(&b, -0.1, 0.3, 0.3),
    };
    let p = SteeringProblem::new(u0, u1, 1.0).unwrap();
    let cfg = SolverConfig::new(b.grid.clone(), 3, 1.0);
    let opts = SteeringOptions {
        perturbation_sizes: vec![1e-2, 5e-3, 1e-3, 1e-4],
        ..Default::default()
    };
    let r = verify_steering(&p, &b, &cfg, &opts).unwrap();
    assert!(r.failure.is_none(), "{:?}", r.failure);
    assert!(r.construction_error <= 1e-8);
    let err = r.endpoint_error.unwrap();
    assert!(err <= 1e-3, "endpoint error {err:e}");
    assert!(r.max_w_deviation.unwrap() <= 1e-3);

    let rows = &r.continuity;
    let data: Vec<f64> = rows.iter().map(|c| c.data_shift.unwrap()).collect();
    let ctrl: Vec<f64> = rows.iter().map(|c| c.control_shift.unwrap()).collect();
    let halving = data[0] / data[1];
    assert!((1.5..2.5).contains(&halving), "data shifts {data:?}");
    assert!(
        (1.5..2.5).contains(&(ctrl[0] / ctrl[1])),
        "control shifts {ctrl:?}"
    );
    for s in [&data, &ctrl] {
        let lip: Vec<f64> = s.iter().zip(rows).map(|(v, c)| v / c.size).collect();
        let (lo, hi) = lip
            .iter()
            .fold((f64::MAX, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
        assert!(hi / lo < 1.5, "Lipschitz ratios {lip:?}");
    }
    let json = serde_json::to_value(&r).unwrap();
    assert_eq!(json["continuity"].as_array().unwrap().len(), 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn endpoints_are_exact_for_any_horizon(t1 in 0.1f64..5.0, seed in 0u64..1000, steps in 1usize..30) {
        let b = basis(1.0, 1.0 / 24.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (u0, u1) = (random_pair(&b, &mut rng), random_pair(&b, &mut rng));
        let p = SteeringProblem::new(u0.clone(), u1.clone(), t1).unwrap();
        let traj = steering_state(&p, &b, steps).unwrap();
        prop_assert!(traj.states[0].axpy(-1.0, &u0).sup_norm() <= 1e-8);
        prop_assert!(traj.states[steps].axpy(-1.0, &u1).sup_norm() <= 1e-8);
    }
}
