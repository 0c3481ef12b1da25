use std::path::{Path, PathBuf};

use corot_core::{ModalBasis, RadialGrid, SobolevOrder, StatePair};
use corot_noise::NoiseModel;
use corot_profiles::{self_similar_state, ProfileParams};
use corot_similarity::FitOptions;
use corot_solver::{SolverConfig, SolverMode};
use serde::{Deserialize, Serialize};

use crate::{EnsembleError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    Zero,
    SelfSimilar {
        t_blowup: f64,
    },
    /// `u_T(0) + ε · exp(-((r - center)/width)²)` in the field component.
    SelfSimilarPerturbed {
        t_blowup: f64,
        eps: f64,
        center: f64,
        width: f64,
    },
    /// `amp · exp(-((r - center)/width)²)` at rest.
    Bump {
        amp: f64,
        center: f64,
        width: f64,
    },
    /// CSV with header `r,u,u_hat` on the grid nodes.
    Custom {
        path: PathBuf,
    },
}

impl InitialData {
    pub fn build(&self, grid: &RadialGrid, d: usize) -> Result<StatePair> {
        Ok(match self {
            Self::Zero => StatePair::zeros(grid.len()),
            Self::SelfSimilar { t_blowup } => {
                self_similar_state(grid, &ProfileParams::new(d, *t_blowup)?, 0.0)?
            }
            Self::SelfSimilarPerturbed {
                t_blowup,
                eps,
                center,
                width,
            } => {
                let mut s = self_similar_state(grid, &ProfileParams::new(d, *t_blowup)?, 0.0)?;
                for (u, &r) in s.u.iter_mut().zip(&grid.nodes) {
                    *u += eps * (-((r - center) / width).powi(2)).exp();
                }
                s
            }
            Self::Bump { amp, center, width } => StatePair {
                u: grid.sample(|r| amp * (-((r - center) / width).powi(2)).exp()),
                u_hat: vec![0.0; grid.len()],
            },
            Self::Custom { path } => read_initial(path, grid)?,
        })
    }
}

#[derive(Deserialize)]
struct InitialRow {
    r: f64,
    u: f64,
    u_hat: f64,
}

fn read_initial(path: &Path, grid: &RadialGrid) -> Result<StatePair> {
    let io = |e: csv::Error| EnsembleError::Io(format!("{}: {e}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(io)?;
    let mut s = StatePair {
        u: Vec::new(),
        u_hat: Vec::new(),
    };
    for (j, row) in rdr.deserialize::<InitialRow>().enumerate() {
        let row = row.map_err(io)?;
        match grid.nodes.get(j) {
            Some(&r) if (r - row.r).abs() <= 1e-9 * r.max(1.0) => {}
            _ => {
                return Err(EnsembleError::Config(format!(
                    "{}: row {j} at r = {} does not match the grid",
                    path.display(),
                    row.r
                )))
            }
        }
        s.u.push(row.u);
        s.u_hat.push(row.u_hat);
    }
    grid.check(&s.u)?;
    if !s.is_finite() {
        return Err(EnsembleError::Config(format!(
            "{}: non-finite values",
            path.display()
        )));
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Amplitude; `0` switches the noise off.
    pub c: f64,
    pub beta: f64,
    pub modes: usize,
}

impl NoiseSpec {
    pub fn model(&self, basis: &ModalBasis) -> Result<Option<NoiseModel>> {
        if self.c == 0.0 {
            return Ok(None);
        }
        Ok(Some(NoiseModel::new(basis, self.c, self.beta, self.modes)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub d: usize,
    pub r_max: f64,
    pub h: f64,
    pub dt_factor: f64,
    pub t_final: f64,
    /// Blowup counts only if detected at `t_exit ≤ horizon`.
    pub horizon: f64,
    pub paths: usize,
    pub run_seed: u64,
    pub noise: NoiseSpec,
    pub initial: InitialData,
    /// Defaults to `0.4 Φ(0)/h`.
    pub amp_threshold: Option<f64>,
    pub fit_window: usize,
    pub s: f64,
    pub k: u32,
    /// Noise amplitudes for [`crate::amplitude_sweep`].
    pub sweep: Option<Vec<f64>>,
    pub threads: Option<usize>,
}

impl EnsembleConfig {
    /// `h = 1/256` on `[0, 3]`, `d = 3`, noise off, one path of exact `u_1` data.
    pub fn new(initial: InitialData, paths: usize) -> Self {
        Self {
            d: 3,
            r_max: 3.0,
            h: 1.0 / 256.0,
            dt_factor: 0.5,
            t_final: 1.5,
            horizon: 1.5,
            paths,
            run_seed: 0,
            noise: NoiseSpec {
                c: 0.0,
                beta: NoiseModel::default_beta(6, 5),
                modes: 32,
            },
            initial,
            amp_threshold: None,
            fit_window: FitOptions::default().window,
            s: 1.6,
            k: 6,
            sweep: None,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(EnsembleError::Config(m));
        if self.paths == 0 {
            return bad("paths must be >= 1".into());
        }
        if !(self.horizon > 0.0 && self.horizon <= self.t_final) {
            return bad(format!(
                "horizon {} must lie in (0, t_final = {}]",
                self.horizon, self.t_final
            ));
        }
        if !(self.noise.c >= 0.0) {
            return bad(format!("noise amplitude {} must be >= 0", self.noise.c));
        }
        if let Some(sw) = &self.sweep {
            if sw.is_empty() || sw.iter().any(|c| !(*c >= 0.0)) {
                return bad("sweep amplitudes must be a non-empty list of values >= 0".into());
            }
        }
        if self.threads == Some(0) {
            return bad("threads must be >= 1".into());
        }
        self.solver_config()?.validate()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<RadialGrid> {
        Ok(RadialGrid::with_spacing(self.r_max, self.h)?)
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let mut cfg = SolverConfig::new(self.grid()?, self.d, self.t_final);
        cfg.dt_factor = self.dt_factor;
        cfg.mode = SolverMode::Direct;
        if let Some(a) = self.amp_threshold {
            cfg.amp_threshold = a;
        }
        cfg.fit.window = self.fit_window;
        cfg.order = SobolevOrder::diagnostic(self.s, self.k);
        Ok(cfg)
    }
}
