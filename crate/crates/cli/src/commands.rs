use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use corot_control::{verify_steering, SteeringOptions, SteeringProblem};
use corot_core::{modal_decompose, RadialGrid, StatePair};
use corot_ensemble::{amplitude_sweep, run_ensemble, InitialData, Prepared, RunOptions};
use corot_lp::{find_T_tilde, write_diagnostics, LinearizedOperator};
use corot_noise::{sample_convolution, NoiseModel};
use corot_profiles::profile_residual;
use corot_similarity::DEFAULT_XI_MAX;
use corot_solver::Solver;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::parse_data;
use crate::{CliError, Command, RunConfig};

type Result<T> = std::result::Result<T, CliError>;

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_at(dir))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = File::create(path).map_err(io_at(path))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Io(e.to_string()))?;
    w.write_all(b"\n").map_err(io_at(path))
}

fn print_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

fn build_data(spec: &str, grid: &RadialGrid, d: usize) -> Result<StatePair> {
    parse_data(spec)?.build(grid, d).map_err(CliError::from)
}

pub fn dispatch(cfg: &RunConfig, command: &Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::ProfileCheck { tol, gauge_tol } => {
            let report = profile_check(cfg, *tol, *gauge_tol)?;
            print_json(out, &report)?;
            if !report.pass {
                return Err(CliError::Failure(format!(
                    "residual {:.3e} (bound {tol:.1e}), gauge residual {:.3e} (bound {gauge_tol:.1e})",
                    report.high_order_max, report.gauge_residual
                )));
            }
            Ok(())
        }
        Command::Simulate {
            data,
            seed,
            out: dir,
            stride,
        } => {
            let report = simulate(cfg, data, seed.unwrap_or(cfg.run.seed), dir, *stride)?;
            print_json(out, &report)
        }
        Command::Ensemble {
            data,
            out: dir,
            no_timing,
            threads,
            sweep,
            paths,
            seed,
        } => {
            let mut cfg = cfg.clone();
            if let Some(p) = paths {
                cfg.run.paths = *p;
            }
            if let Some(s) = seed {
                cfg.run.seed = *s;
            }
            let mut ec = cfg.ensemble_config(parse_data(data)?, *threads);
            ec.sweep = sweep.clone();
            let opts = RunOptions {
                out_dir: Some(dir.clone()),
                no_timing: *no_timing,
            };
            if ec.sweep.is_some() {
                let rows = amplitude_sweep(&ec, &opts)?;
                let path = dir.join("sweep.csv");
                let mut w = csv_writer(&path)?;
                w.write_record([
                    "c",
                    "paths",
                    "blowups",
                    "fraction",
                    "wilson_lo",
                    "wilson_hi",
                ])
                .map_err(csv_err)?;
                for r in &rows {
                    w.write_record([
                        r.c.to_string(),
                        r.paths.to_string(),
                        r.blowups.to_string(),
                        r.fraction.to_string(),
                        r.interval.0.to_string(),
                        r.interval.1.to_string(),
                    ])
                    .map_err(csv_err)?;
                }
                w.flush()?;
                print_json(out, &rows)
            } else {
                let stats = run_ensemble(&ec, &opts)?;
                print_json(out, &stats)
            }
        }
        Command::LpSolve {
            data,
            t_blowup,
            seed,
            out: dir,
        } => {
            let report = lp_solve(
                cfg,
                data,
                *t_blowup,
                seed.unwrap_or(cfg.run.seed),
                dir.as_deref(),
            )?;
            print_json(out, &report)
        }
        Command::Steer {
            data,
            target,
            tol,
            out: dir,
        } => {
            let report = steer(cfg, data, target)?;
            if let Some(dir) = dir {
                create_dir(dir)?;
                write_json(&dir.join("steer.json"), &report)?;
            }
            print_json(out, &report)?;
            match (report.endpoint_error, &report.failure) {
                (_, Some(f)) => Err(CliError::Failure(f.clone())),
                (Some(e), None) if e <= *tol => Ok(()),
                (e, None) => Err(CliError::Failure(format!(
                    "endpoint error {e:?} above {tol:.1e}"
                ))),
            }
        }
        Command::Spectrum { xi_points, tol } => {
            let report = spectrum(cfg, *xi_points)?;
            print_json(out, &report)?;
            if !(report.gauge_residual <= *tol && report.projection_defect <= 1e-10) {
                return Err(CliError::Failure(format!(
                    "gauge residual {:.3e} (bound {tol:.1e}), |P^2 - P| = {:.3e}",
                    report.gauge_residual, report.projection_defect
                )));
            }
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileCheck {
    pub n_points: usize,
    pub h: f64,
    pub r_eval: f64,
    pub high_order_max: f64,
    pub high_order_l2: f64,
    pub conservative_max: f64,
    pub gauge_residual: f64,
    pub eigenvalue: f64,
    pub pass: bool,
}

/// Residual of `u_T` at `T - t = 1` over `r ≤ min(5, r_max - 3h)`, and of the
/// discrete gauge eigenpair on the default similarity grid.
pub fn profile_check(cfg: &RunConfig, tol: f64, gauge_tol: f64) -> Result<ProfileCheck> {
    let grid = cfg.grid()?;
    let r_eval = 5.0f64.min(grid.r_max - 3.0 * grid.h);
    if r_eval <= grid.h {
        return Err(CliError::Usage(format!(
            "grid too small: r_max = {}",
            grid.r_max
        )));
    }
    let res = profile_residual(&grid, cfg.model.d, r_eval)?;
    let lp = cfg.lp_config();
    let op = LinearizedOperator::new(RadialGrid::new(lp.xi_max, lp.xi_points)?, cfg.model.d)?;
    let gauge_residual = op.analytic_gauge_residual();
    Ok(ProfileCheck {
        n_points: grid.n_points,
        h: grid.h,
        r_eval,
        high_order_max: res.high_order.max,
        high_order_l2: res.high_order.l2,
        conservative_max: res.conservative.max,
        gauge_residual,
        eigenvalue: op.eigenvalue(),
        pass: res.high_order.max <= tol && gauge_residual <= gauge_tol,
    })
}

/// One path of the direct solver; writes `trajectory.csv` (long format
/// `t,r,u,u_hat`) and `report.json` into `dir`.
pub fn simulate(
    cfg: &RunConfig,
    data: &str,
    seed: u64,
    dir: &Path,
    stride: usize,
) -> Result<corot_solver::BlowupReport> {
    let mut ec = cfg.ensemble_config(parse_data(data)?, None);
    ec.paths = 1;
    let prep = Prepared::new(&ec)?;
    let mut sc = prep.solver.clone();
    let steps = (sc.t_final / (sc.dt_factor * sc.grid.h)).ceil() as usize;
    sc.record_stride = if stride == 0 {
        (steps / 100).max(1)
    } else {
        stride
    };
    let solver = Solver::new(sc, prep.noise.as_ref(), Some(&prep.basis))?;
    let out = solver.solve(&prep.initial, seed)?;

    create_dir(dir)?;
    let path = dir.join("trajectory.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["t", "r", "u", "u_hat"]).map_err(csv_err)?;
    for (t, s) in &out.snapshots {
        for (j, r) in prep.solver.grid.nodes.iter().enumerate() {
            w.write_record([
                t.to_string(),
                r.to_string(),
                s.u[j].to_string(),
                s.u_hat[j].to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    write_json(&dir.join("report.json"), &out.report)?;
    Ok(out.report)
}

#[derive(Debug, Clone, Serialize)]
pub struct LpReport {
    pub t_blowup: f64,
    pub t_tilde: f64,
    pub coefficient: f64,
    pub iterations: usize,
    pub converged: bool,
    pub max_contraction: Option<f64>,
    pub defect: f64,
    pub tail_bound: f64,
    pub weighted_norm: f64,
    pub within_ball: bool,
}

pub fn lp_solve(
    cfg: &RunConfig,
    data: &str,
    t_blowup: Option<f64>,
    seed: u64,
    dir: Option<&Path>,
) -> Result<LpReport> {
    let initial = parse_data(data)?;
    let t_ref = t_blowup.unwrap_or(match initial {
        InitialData::SelfSimilar { t_blowup }
        | InitialData::SelfSimilarPerturbed { t_blowup, .. } => t_blowup,
        _ => 1.0,
    });
    let lp = cfg.lp_config();
    let phys = cfg.grid()?;
    let u0 = initial.build(&phys, cfg.model.d)?;
    let op = LinearizedOperator::new(RadialGrid::new(lp.xi_max, lp.xi_points)?, cfg.model.d)?;

    let noise = if cfg.noise.c > 0.0 {
        let basis = modal_decompose(&phys, cfg.n())?;
        let model = NoiseModel::new(&basis, cfg.noise.c, cfg.beta(), cfg.noise.modes)?;
        let path = sample_convolution(
            &model,
            cfg.grid.dt_factor * phys.h,
            lp.bracket(t_ref).1,
            seed,
        )?;
        Some((model, path))
    } else {
        None
    };
    let res = find_T_tilde(
        &u0,
        &phys,
        noise.as_ref().map(|(m, p)| (m, p)),
        t_ref,
        &op,
        &lp,
    )?;
    if let Some(dir) = dir {
        create_dir(dir)?;
        let path = dir.join("lp_diagnostics.json");
        let f = File::create(&path).map_err(io_at(&path))?;
        write_diagnostics(&res.diagnostics, BufWriter::new(f))?;
    }
    let s = &res.solution;
    Ok(LpReport {
        t_blowup: t_ref,
        t_tilde: res.t_tilde,
        coefficient: res.coefficient,
        iterations: s.iterations,
        converged: s.converged,
        max_contraction: s.factors.iter().copied().reduce(f64::max),
        defect: s.defect,
        tail_bound: s.tail_bound,
        weighted_norm: s.weighted_norm,
        within_ball: s.within_ball,
    })
}

pub fn steer(cfg: &RunConfig, data: &str, target: &str) -> Result<corot_control::SteeringReport> {
    let grid = cfg.grid()?;
    let u0 = build_data(data, &grid, cfg.model.d)?;
    let u1 = build_data(target, &grid, cfg.model.d)?;
    let problem = SteeringProblem::new(u0, u1, cfg.control.t1)?;
    let basis = modal_decompose(&grid, cfg.n())?;
    let sc = cfg.solver_config(cfg.control.t1)?;
    let options = SteeringOptions {
        order: sc.order,
        ..SteeringOptions::default()
    };
    Ok(verify_steering(&problem, &basis, &sc, &options)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub xi_max: f64,
    pub xi_points: usize,
    pub eigenvalue: f64,
    /// `‖L x - λ x‖∞ / ‖x‖∞` for the computed right eigenvector.
    pub eigen_residual: f64,
    pub left_residual: f64,
    pub iterations: usize,
    /// `‖L g - g‖ / ‖g‖` for the closed-form gauge mode on interior nodes.
    pub gauge_residual: f64,
    /// `max |P²f - Pf| / max(|Pf|, 1)` over random smooth `f`.
    pub projection_defect: f64,
}

pub fn spectrum(cfg: &RunConfig, xi_points: usize) -> Result<SpectrumReport> {
    let op = LinearizedOperator::new(RadialGrid::new(DEFAULT_XI_MAX, xi_points)?, cfg.model.d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let mut projection_defect = 0.0f64;
    for _ in 0..8 {
        let (a, m, w): (f64, f64, f64) = (
            rng.random_range(-1.0..1.0),
            rng.random_range(0.0..2.0),
            rng.random_range(0.2..0.6),
        );
        let (b, v) = (rng.random_range(-1.0..1.0), rng.random_range(0.2..0.6));
        let f = StatePair {
            u: op.grid().sample(|x| a * (-((x - m) / w).powi(2)).exp()),
            u_hat: op.grid().sample(|x| b * (-(x / v).powi(2)).exp()),
        };
        let pf = op.project(&f);
        let ppf = op.project(&pf);
        projection_defect =
            projection_defect.max(ppf.axpy(-1.0, &pf).sup_norm() / pf.sup_norm().max(1.0));
    }
    Ok(SpectrumReport {
        xi_max: op.grid().r_max,
        xi_points,
        eigenvalue: op.eigenvalue(),
        eigen_residual: op.spectrum.residual,
        left_residual: op.spectrum.left_residual,
        iterations: op.spectrum.iterations,
        gauge_residual: op.analytic_gauge_residual(),
        projection_defect,
    })
}
