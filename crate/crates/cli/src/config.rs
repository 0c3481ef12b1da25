use std::path::{Path, PathBuf};

use corot_core::{RadialGrid, SobolevOrder};
use corot_ensemble::{EnsembleConfig, InitialData, NoiseSpec};
use corot_lp::LPConfig;
use corot_noise::NoiseModel;
use corot_similarity::FitOptions;
use corot_solver::SolverConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub d: usize,
    pub s: f64,
    pub k: u32,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { d: 3, s: 1.6, k: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub r_max: f64,
    pub n_points: usize,
    pub dt_factor: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            r_max: 6.0,
            n_points: 1536,
            dt_factor: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub c: f64,
    /// Defaults to `k + (n+1)/2 + 2`.
    pub beta: Option<f64>,
    pub modes: usize,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            c: 0.0,
            beta: None,
            modes: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub t_final: f64,
    pub horizon: f64,
    pub paths: usize,
    pub seed: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            t_final: 1.5,
            horizon: 1.5,
            paths: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectSection {
    /// Defaults to `0.4 Φ(0)/h`.
    pub amp_threshold: Option<f64>,
    pub fit_window: usize,
}

impl Default for DetectSection {
    fn default() -> Self {
        Self {
            amp_threshold: None,
            fit_window: FitOptions::default().window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LpSection {
    pub delta: f64,
    #[serde(rename = "big_C")]
    pub big_c: f64,
    #[serde(rename = "N")]
    pub n: f64,
    pub omega_bar: f64,
    pub tau_max: f64,
    pub picard_tol: f64,
}

impl Default for LpSection {
    fn default() -> Self {
        let d = LPConfig::default();
        Self {
            delta: d.delta,
            big_c: d.big_c,
            n: d.n_bracket,
            omega_bar: d.omega_bar,
            tau_max: d.tau_max,
            picard_tol: d.picard_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlSection {
    #[serde(rename = "T1")]
    pub t1: f64,
}

impl Default for ControlSection {
    fn default() -> Self {
        Self { t1: 1.0 }
    }
}

/// The TOML run configuration; every section and key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    pub noise: NoiseSection,
    pub run: RunSection,
    pub detect: DetectSection,
    pub lp: LpSection,
    pub control: ControlSection,
}

pub const CONFIG_HELP: &str = "\
Configuration file (TOML). Every section and key is optional.

[model]   d          target sphere dimension (radial problem in n = d+2), default 3
          s          regularity index, must satisfy n/2-1 < s < n/2-1+1/(2n-4), default 1.6
          k          high regularity index, integer > n, default 6
[grid]    r_max      outer radius of the physical domain, default 6
          n_points   number of cells (h = r_max/n_points), default 1536
          dt_factor  time step dt = dt_factor*h, in (0, 0.85], default 0.5
[noise]   c          noise amplitude, 0 switches noise off, default 0
          beta       spectral decay sigma_k = c(1+lambda_k)^(-beta/2), default k+(n+1)/2+2
          modes      number of forced modes, default 32
[run]     t_final    final time, default 1.5
          horizon    blowup counts only before this time, <= t_final, default 1.5
          paths      ensemble size, default 200
          seed       64-bit run seed, default 0
[detect]  amp_threshold  blowup when sup|u| reaches this value, default 0.4*Phi(0)/h
          fit_window     samples per blowup-time fit window, default 50
[lp]      delta      ball radius in the weighted norm, default 0.5
          big_C      data smallness constant (|v|, |Z| <= delta/big_C), default 2
          N          blowup-time bracket [T-delta/N, T+delta/N], default 20
          omega_bar  decay rate of the weighted norm, in (0, s+1-n/2), default 0.05
          tau_max    similarity-time truncation, >= 10/omega_bar, default 200
          picard_tol fixed-point tolerance, default 1e-10
[control] T1         steering horizon, default 1

Data selectors (--data, --target):
  zero | self-similar[:T] | perturbed[:T:eps] | bump:amp:center:width | <file.csv>
  (CSV files have header r,u,u_hat and one row per grid node.)

Exit codes: 0 success, 1 threshold or numerical failure, 2 usage or invalid
configuration, 3 I/O error.";

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        Self::load_with(path, &[])
    }

    /// Reads `path` (or the defaults) and applies `section.key=value` overrides,
    /// each value parsed as a TOML value.
    pub fn load_with(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = match path {
            None => toml::Table::new(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
            }
        };
        for o in overrides {
            let bad = || CliError::Usage(format!("override '{o}' is not section.key=value"));
            let (key, value) = o.split_once('=').ok_or_else(bad)?;
            let (section, key) = key.trim().split_once('.').ok_or_else(bad)?;
            let value: toml::Value = format!("v = {}", value.trim())
                .parse::<toml::Table>()
                .map_err(|_| bad())?
                .remove("v")
                .ok_or_else(bad)?;
            let entry = table
                .entry(section.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let toml::Value::Table(t) = entry else {
                return Err(bad());
            };
            t.insert(key.to_string(), value);
        }
        let cfg: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Usage(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn n(&self) -> usize {
        self.model.d + 2
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(m));
        if self.model.d < 3 {
            return bad(format!("model.d = {} must be >= 3", self.model.d));
        }
        SobolevOrder::new(self.model.s, self.model.k, self.n())
            .map_err(|e| CliError::Usage(e.to_string()))?;
        if self.run.horizon > self.run.t_final {
            return bad(format!(
                "run.horizon = {} exceeds run.t_final = {}",
                self.run.horizon, self.run.t_final
            ));
        }
        if !(self.run.horizon > 0.0) {
            return bad(format!(
                "run.horizon = {} must be positive",
                self.run.horizon
            ));
        }
        if !(self.noise.c >= 0.0) || !(self.beta() > 0.0) || self.noise.modes == 0 {
            return bad("noise needs c >= 0, beta > 0 and modes >= 1".into());
        }
        if self.run.paths == 0 {
            return bad("run.paths must be >= 1".into());
        }
        if !(self.control.t1 > 0.0) {
            return bad(format!("control.T1 = {} must be positive", self.control.t1));
        }
        self.solver_config(self.run.t_final)?
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(())
    }

    pub fn grid(&self) -> Result<RadialGrid, CliError> {
        RadialGrid::new(self.grid.r_max, self.grid.n_points)
            .map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn beta(&self) -> f64 {
        self.noise
            .beta
            .unwrap_or_else(|| NoiseModel::default_beta(self.model.k, self.n()))
    }

    pub fn solver_config(&self, t_final: f64) -> Result<SolverConfig, CliError> {
        let mut cfg = SolverConfig::new(self.grid()?, self.model.d, t_final);
        cfg.dt_factor = self.grid.dt_factor;
        if let Some(a) = self.detect.amp_threshold {
            cfg.amp_threshold = a;
        }
        cfg.fit.window = self.detect.fit_window;
        cfg.order = SobolevOrder::diagnostic(self.model.s, self.model.k);
        Ok(cfg)
    }

    pub fn lp_config(&self) -> LPConfig {
        LPConfig {
            delta: self.lp.delta,
            big_c: self.lp.big_c,
            n_bracket: self.lp.n,
            omega_bar: self.lp.omega_bar,
            tau_max: self.lp.tau_max,
            picard_tol: self.lp.picard_tol,
            s: self.model.s,
            ..LPConfig::default()
        }
    }

    pub fn ensemble_config(&self, initial: InitialData, threads: Option<usize>) -> EnsembleConfig {
        let g = &self.grid;
        EnsembleConfig {
            d: self.model.d,
            r_max: g.r_max,
            h: g.r_max / g.n_points as f64,
            dt_factor: g.dt_factor,
            t_final: self.run.t_final,
            horizon: self.run.horizon,
            paths: self.run.paths,
            run_seed: self.run.seed,
            noise: NoiseSpec {
                c: self.noise.c,
                beta: self.beta(),
                modes: self.noise.modes,
            },
            initial,
            amp_threshold: self.detect.amp_threshold,
            fit_window: self.detect.fit_window,
            s: self.model.s,
            k: self.model.k,
            sweep: None,
            threads,
        }
    }
}

/// Parses a data selector (see [`CONFIG_HELP`]).
pub fn parse_data(spec: &str) -> Result<InitialData, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let nums = |xs: &[&str]| -> Result<Vec<f64>, CliError> {
        xs.iter()
            .map(|x| {
                x.parse::<f64>().map_err(|_| {
                    CliError::Usage(format!("bad number '{x}' in data selector '{spec}'"))
                })
            })
            .collect()
    };
    let arity = |want: &str| CliError::Usage(format!("data selector '{spec}' expects {want}"));
    Ok(match parts[0] {
        "zero" if parts.len() == 1 => InitialData::Zero,
        "self-similar" => match nums(&parts[1..])?.as_slice() {
            [] => InitialData::SelfSimilar { t_blowup: 1.0 },
            [t] => InitialData::SelfSimilar { t_blowup: *t },
            _ => return Err(arity("self-similar[:T]")),
        },
        "perturbed" => match nums(&parts[1..])?.as_slice() {
            [] => InitialData::SelfSimilarPerturbed {
                t_blowup: 1.0,
                eps: 1e-3,
                center: 0.0,
                width: 0.5,
            },
            [t] => InitialData::SelfSimilarPerturbed {
                t_blowup: *t,
                eps: 1e-3,
                center: 0.0,
                width: 0.5,
            },
            [t, e] => InitialData::SelfSimilarPerturbed {
                t_blowup: *t,
                eps: *e,
                center: 0.0,
                width: 0.5,
            },
            _ => return Err(arity("perturbed[:T[:eps]]")),
        },
        "bump" => match nums(&parts[1..])?.as_slice() {
            [a, c, w] => InitialData::Bump {
                amp: *a,
                center: *c,
                width: *w,
            },
            _ => return Err(arity("bump:amp:center:width")),
        },
        _ => InitialData::Custom {
            path: PathBuf::from(spec),
        },
    })
}
