use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use corot_core::{modal_decompose, ModalBasis, RadialGrid, StatePair};
use corot_noise::{path_seed, NoiseModel};
use corot_solver::{BlowupReport, Solver, SolverConfig};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::stats::{wilson_interval, DiscrepancySummary, Histogram, Z95};
use crate::{EnsembleConfig, EnsembleError, Result};

pub const RECORDS_FILE: &str = "records.csv";
pub const PARTIAL_FILE: &str = "records.partial.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Blowup,
    Global,
    Error,
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRecord {
    pub path_id: usize,
    pub seed: u64,
    pub outcome: Outcome,
    pub t_exit: Option<f64>,
    #[serde(rename = "T_hat")]
    pub t_hat: Option<f64>,
    pub profile_err_final: Option<f64>,
    pub sup_amp: Option<f64>,
    pub exit_norm_s: Option<f64>,
    pub exit_norm_k: Option<f64>,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory for the records and the manifest; nothing is written when unset.
    pub out_dir: Option<PathBuf>,
    /// Record `wall_ms = 0` so that outputs are byte-identical across runs.
    pub no_timing: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleStats {
    pub paths: usize,
    pub blowups: usize,
    pub errors: usize,
    pub blowup_fraction: f64,
    /// Wilson 95% interval.
    pub interval: (f64, f64),
    pub t_hat_histogram: Histogram,
    pub discrepancy: DiscrepancySummary,
    /// Blowup paths with `T̂ ∈ (T/2, 3T/2)` where `T` is the data's blowup time
    /// (the horizon for zero data).
    pub t_hat_in_bracket: usize,
    #[serde(skip)]
    pub records: Vec<PathRecord>,
    #[serde(skip)]
    pub reports: Vec<Option<BlowupReport>>,
}

/// Shared, immutable inputs of an ensemble.
pub struct Prepared {
    pub config: EnsembleConfig,
    pub solver: SolverConfig,
    pub basis: ModalBasis,
    pub noise: Option<NoiseModel>,
    pub initial: StatePair,
}

impl Prepared {
    pub fn new(config: &EnsembleConfig) -> Result<Self> {
        config.validate()?;
        let solver = config.solver_config()?;
        let basis = modal_decompose(&solver.grid, solver.n())?;
        let noise = config.noise.model(&basis)?;
        let initial = config.initial.build(&solver.grid, config.d)?;
        Ok(Self {
            config: config.clone(),
            solver,
            basis,
            noise,
            initial,
        })
    }

    /// Solves path `index`; failures become an `error` record.
    pub fn run_path(&self, index: usize, no_timing: bool) -> (PathRecord, Option<BlowupReport>) {
        let seed = path_seed(self.config.run_seed, index as u64);
        let start = Instant::now();
        let result = Solver::new(self.solver.clone(), self.noise.as_ref(), Some(&self.basis))
            .and_then(|s| s.solve(&self.initial, seed));
        let wall_ms = if no_timing {
            0
        } else {
            start.elapsed().as_millis() as u64
        };
        match result {
            Ok(out) => {
                let r = out.report;
                let outcome = if r.blew_up && r.t_exit <= self.config.horizon {
                    Outcome::Blowup
                } else {
                    Outcome::Global
                };
                let rec = PathRecord {
                    path_id: index,
                    seed,
                    outcome,
                    t_exit: Some(r.t_exit),
                    t_hat: r.t_hat,
                    profile_err_final: r.profile_err_final,
                    sup_amp: Some(r.sup_amp),
                    exit_norm_s: r.exit_norms.sobolev_s,
                    exit_norm_k: r.exit_norms.sobolev_k,
                    wall_ms,
                };
                (rec, Some(r))
            }
            Err(_) => (
                PathRecord {
                    path_id: index,
                    seed,
                    outcome: Outcome::Error,
                    t_exit: None,
                    t_hat: None,
                    profile_err_final: None,
                    sup_amp: None,
                    exit_norm_s: None,
                    exit_norm_k: None,
                    wall_ms,
                },
                None,
            ),
        }
    }

    fn reference_time(&self) -> f64 {
        use crate::InitialData::*;
        match &self.config.initial {
            SelfSimilar { t_blowup } | SelfSimilarPerturbed { t_blowup, .. } => *t_blowup,
            _ => self.config.horizon,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> EnsembleError {
    EnsembleError::Io(format!("{}: {e}", path.display()))
}

fn sha_hex(values: impl IntoIterator<Item = f64>) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn grid_checksum(grid: &RadialGrid) -> String {
    sha_hex(grid.nodes.iter().copied())
}

pub fn basis_checksum(basis: &ModalBasis) -> String {
    sha_hex(
        basis
            .eigenvalues
            .iter()
            .chain(basis.eigenvectors.iter())
            .copied(),
    )
}

/// Decreasing over the stored tail: every step strictly down.
pub fn is_decreasing(history: &[(f64, f64)]) -> bool {
    history.len() >= 2 && history.windows(2).all(|w| w[1].1 < w[0].1)
}

fn aggregate(
    prep: &Prepared,
    records: Vec<PathRecord>,
    reports: Vec<Option<BlowupReport>>,
) -> EnsembleStats {
    let paths = records.len();
    let blowups = records
        .iter()
        .filter(|r| r.outcome == Outcome::Blowup)
        .count();
    let errors = records
        .iter()
        .filter(|r| r.outcome == Outcome::Error)
        .count();
    let blown: Vec<usize> = (0..paths)
        .filter(|&i| records[i].outcome == Outcome::Blowup)
        .collect();
    let t_hats: Vec<f64> = blown.iter().filter_map(|&i| records[i].t_hat).collect();
    let t_ref = prep.reference_time();
    let finals: Vec<f64> = blown
        .iter()
        .filter_map(|&i| records[i].profile_err_final)
        .collect();
    let decreasing = blown
        .iter()
        .filter(|&&i| {
            reports[i]
                .as_ref()
                .is_some_and(|r| is_decreasing(&r.discrepancy_history))
        })
        .count();
    EnsembleStats {
        paths,
        blowups,
        errors,
        blowup_fraction: blowups as f64 / paths as f64,
        interval: wilson_interval(blowups, paths, Z95),
        t_hat_histogram: Histogram::new(
            0.0,
            prep.config.t_final,
            HISTOGRAM_BINS,
            t_hats.iter().copied(),
        ),
        discrepancy: DiscrepancySummary {
            count: finals.len(),
            mean_final: (!finals.is_empty())
                .then(|| finals.iter().sum::<f64>() / finals.len() as f64),
            max_final: finals.iter().copied().reduce(f64::max),
            decreasing,
        },
        t_hat_in_bracket: t_hats
            .iter()
            .filter(|t| **t > 0.5 * t_ref && **t < 1.5 * t_ref)
            .count(),
        records,
        reports,
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    code_version: &'a str,
    config: &'a EnsembleConfig,
    grid_checksum: String,
    basis_checksum: String,
    dt: f64,
    note: &'a str,
    stats: &'a EnsembleStats,
}

fn write_csv(path: &Path, records: &[PathRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    for r in records {
        w.serialize(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| EnsembleError::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs every path in parallel, streaming records to the partial file as they
/// complete; the final file is ordered by path index.
pub fn run_ensemble(config: &EnsembleConfig, options: &RunOptions) -> Result<EnsembleStats> {
    let prep = Prepared::new(config)?;
    run_prepared(&prep, options)
}

pub fn run_prepared(prep: &Prepared, options: &RunOptions) -> Result<EnsembleStats> {
    let partial = match &options.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
            let p = dir.join(PARTIAL_FILE);
            let w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_path(&p)
                .map_err(|e| io_err(&p, e))?;
            Some((p, Mutex::new(w)))
        }
        None => None,
    };
    let results: Vec<(PathRecord, Option<BlowupReport>)> = with_pool(prep.config.threads, || {
        (0..prep.config.paths)
            .into_par_iter()
            .map(|i| {
                let res = prep.run_path(i, options.no_timing);
                if let Some((_, w)) = &partial {
                    let mut w = w.lock().unwrap_or_else(|e| e.into_inner());
                    // streaming is best effort; the final file is authoritative
                    let _ = w
                        .serialize(&res.0)
                        .and_then(|_| w.flush().map_err(Into::into));
                }
                res
            })
            .collect()
    })?;
    let (records, reports): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let stats = aggregate(prep, records, reports);

    if let (Some(dir), Some((p, w))) = (&options.out_dir, partial) {
        drop(w);
        write_csv(&dir.join(RECORDS_FILE), &stats.records)?;
        fs::remove_file(&p).map_err(|e| io_err(&p, e))?;
        let manifest = Manifest {
            code_version: env!("CARGO_PKG_VERSION"),
            config: &prep.config,
            grid_checksum: grid_checksum(&prep.solver.grid),
            basis_checksum: basis_checksum(&prep.basis),
            dt: Solver::new(prep.solver.clone(), None, None)?.dt(),
            note: "blowup fractions are Monte Carlo measurements of this discretization, not predicted values",
            stats: &stats,
        };
        let mp = dir.join(MANIFEST_FILE);
        let f = File::create(&mp).map_err(|e| io_err(&mp, e))?;
        let mut bw = BufWriter::new(f);
        serde_json::to_writer_pretty(&mut bw, &manifest).map_err(|e| io_err(&mp, e))?;
        bw.write_all(b"\n")
            .and_then(|_| bw.flush())
            .map_err(|e| io_err(&mp, e))?;
    }
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub c: f64,
    pub paths: usize,
    pub blowups: usize,
    pub fraction: f64,
    pub interval: (f64, f64),
}

/// Blowup fraction for each amplitude of `config.sweep`; with an output
/// directory every amplitude gets its own `c_<index>` subdirectory.
pub fn amplitude_sweep(config: &EnsembleConfig, options: &RunOptions) -> Result<Vec<SweepRow>> {
    let amps = config
        .sweep
        .clone()
        .ok_or_else(|| EnsembleError::Config("no sweep amplitudes given".into()))?;
    let mut rows = Vec::with_capacity(amps.len());
    for (i, c) in amps.into_iter().enumerate() {
        let mut cfg = config.clone();
        cfg.noise.c = c;
        cfg.sweep = None;
        let opts = RunOptions {
            out_dir: options.out_dir.as_ref().map(|d| d.join(format!("c_{i}"))),
            no_timing: options.no_timing,
        };
        let s = run_ensemble(&cfg, &opts)?;
        rows.push(SweepRow {
            c,
            paths: s.paths,
            blowups: s.blowups,
            fraction: s.blowup_fraction,
            interval: s.interval,
        });
    }
    Ok(rows)
}
