use std::io::{Read, Write};

use corot_core::{sample_cubic, Closure, StatePair};
use corot_physics::sinc;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::model::{cholesky3, step_covariance, NoiseModel};
use crate::NoiseError;

const MAGIC: &[u8; 5] = b"CBLZ1";

/// One sampled noise realization on the leading modes.
///
/// `increments[s * M + k]` is the Brownian increment `σ_k ΔB_k` over step `s`;
/// `z[s * M + k]`, `z_dot[s * M + k]` are the modal convolution coefficients at
/// `t = s·dt`, `s = 0..=steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub dt: f64,
    pub steps: usize,
    pub modes: usize,
    pub seed: u64,
    pub increments: Vec<f64>,
    pub z: Vec<f64>,
    pub z_dot: Vec<f64>,
}

/// Counter-based per-path seed (splitmix64 finalizer of `run_seed` and `index`).
pub fn path_seed(run_seed: u64, index: u64) -> u64 {
    let mut x = run_seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn sample_convolution(
    model: &NoiseModel,
    dt: f64,
    t_final: f64,
    seed: u64,
) -> Result<NoisePath, NoiseError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(NoiseError::Domain(format!("dt must be positive, got {dt}")));
    }
    if !(t_final >= 0.0) {
        return Err(NoiseError::Domain(format!(
            "t_final must be >= 0, got {t_final}"
        )));
    }
    let steps = (t_final / dt).round() as usize;
    if ((steps as f64) * dt - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(NoiseError::Domain(format!(
            "t_final = {t_final} is not a multiple of dt = {dt}"
        )));
    }
    let m = model.modes();
    let factors: Vec<[[f64; 3]; 3]> = model
        .omegas
        .iter()
        .map(|&w| cholesky3(step_covariance(w, dt)))
        .collect();
    let rot: Vec<(f64, f64, f64)> = model
        .omegas
        .iter()
        .map(|&w| {
            let y = w * dt;
            (y.cos(), dt * sinc(y), w * y.sin())
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut increments = vec![0.0; steps * m];
    let mut z = vec![0.0; (steps + 1) * m];
    let mut z_dot = vec![0.0; (steps + 1) * m];
    for s in 0..steps {
        for k in 0..m {
            // draws are taken even for silent modes so paths stay aligned across models
            let xi: [f64; 3] = [
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            ];
            let l = &factors[k];
            let sig = model.sigmas[k];
            let db = sig * l[0][0] * xi[0];
            let ez = sig * (l[1][0] * xi[0] + l[1][1] * xi[1]);
            let ev = sig * (l[2][0] * xi[0] + l[2][1] * xi[1] + l[2][2] * xi[2]);
            let (c, s_over_w, w_s) = rot[k];
            let (a, b) = (z[s * m + k], z_dot[s * m + k]);
            z[(s + 1) * m + k] = c * a + s_over_w * b + ez;
            z_dot[(s + 1) * m + k] = -w_s * a + c * b + ev;
            increments[s * m + k] = db;
        }
    }
    Ok(NoisePath {
        dt,
        steps,
        modes: m,
        seed,
        increments,
        z,
        z_dot,
    })
}

impl NoisePath {
    pub fn t_final(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn increment(&self, step: usize) -> &[f64] {
        &self.increments[step * self.modes..(step + 1) * self.modes]
    }

    pub fn z_coeffs(&self, step: usize) -> (&[f64], &[f64]) {
        let r = step * self.modes..(step + 1) * self.modes;
        (&self.z[r.clone()], &self.z_dot[r])
    }

    /// Same Brownian path on a grid of step `2·dt`.
    pub fn coarsen(&self) -> NoisePath {
        let m = self.modes;
        let steps = self.steps / 2;
        let mut increments = vec![0.0; steps * m];
        for s in 0..steps {
            for k in 0..m {
                increments[s * m + k] =
                    self.increments[2 * s * m + k] + self.increments[(2 * s + 1) * m + k];
            }
        }
        let pick = |v: &Vec<f64>| -> Vec<f64> {
            (0..=steps)
                .flat_map(|s| v[2 * s * m..(2 * s + 1) * m].iter().copied())
                .collect()
        };
        NoisePath {
            dt: 2.0 * self.dt,
            steps,
            modes: m,
            seed: self.seed,
            increments,
            z: pick(&self.z),
            z_dot: pick(&self.z_dot),
        }
    }

    /// Modal coefficients at time `t`, linear in time between stored steps.
    pub fn coeffs_at(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>), NoiseError> {
        let tf = self.t_final();
        if !(t >= 0.0 && t <= tf * (1.0 + 1e-12)) {
            return Err(NoiseError::Domain(format!(
                "time {t} outside the path [0, {tf}]"
            )));
        }
        let mut p = (t / self.dt).min(self.steps as f64);
        if (p - p.round()).abs() < 1e-9 {
            p = p.round();
        }
        let s = (p.floor() as usize).min(self.steps.saturating_sub(1));
        let th = if self.steps == 0 { 0.0 } else { p - s as f64 };
        let m = self.modes;
        let lerp = |v: &Vec<f64>| -> Vec<f64> {
            if self.steps == 0 {
                return v[..m].to_vec();
            }
            (0..m)
                .map(|k| (1.0 - th) * v[s * m + k] + th * v[(s + 1) * m + k])
                .collect()
        };
        Ok((lerp(&self.z), lerp(&self.z_dot)))
    }

    /// `(z, ẑ)` on the model grid at time `t`.
    pub fn field_at(&self, model: &NoiseModel, t: f64) -> Result<StatePair, NoiseError> {
        let (a, b) = self.coeffs_at(t)?;
        Ok(StatePair {
            u: model.synthesize(&a),
            u_hat: model.synthesize(&b),
        })
    }

    /// Point evaluation `(z, ẑ)(t, r)`: linear in time, cubic in space.
    pub fn evaluate_z(&self, model: &NoiseModel, t: f64, r: f64) -> Result<(f64, f64), NoiseError> {
        if !(r >= 0.0 && r <= model.grid.r_max) {
            return Err(NoiseError::Domain(format!(
                "radius {r} outside [0, {}]",
                model.grid.r_max
            )));
        }
        let f = self.field_at(model, t)?;
        Ok((
            sample_cubic(&f.u, &model.grid, Closure::Dirichlet, r)?,
            sample_cubic(&f.u_hat, &model.grid, Closure::Dirichlet, r)?,
        ))
    }
}

/// Binary dump: magic `CBLZ1`, then `steps`, `modes` (u64), `dt` (f64), `seed`
/// (u64), then increments, `z` and `ż`, each mode-major, all little-endian.
pub fn write_path<W: Write>(path: &NoisePath, mut w: W) -> Result<(), NoiseError> {
    w.write_all(MAGIC)?;
    w.write_all(&(path.steps as u64).to_le_bytes())?;
    w.write_all(&(path.modes as u64).to_le_bytes())?;
    w.write_all(&path.dt.to_le_bytes())?;
    w.write_all(&path.seed.to_le_bytes())?;
    let m = path.modes;
    for (data, rows) in [
        (&path.increments, path.steps),
        (&path.z, path.steps + 1),
        (&path.z_dot, path.steps + 1),
    ] {
        for k in 0..m {
            for s in 0..rows {
                w.write_all(&data[s * m + k].to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_path<R: Read>(mut r: R) -> Result<NoisePath, NoiseError> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NoiseError::Format("bad magic".into()));
    }
    let mut b8 = [0u8; 8];
    let mut next = |r: &mut R| -> Result<[u8; 8], NoiseError> {
        r.read_exact(&mut b8)?;
        Ok(b8)
    };
    let steps = u64::from_le_bytes(next(&mut r)?) as usize;
    let modes = u64::from_le_bytes(next(&mut r)?) as usize;
    let dt = f64::from_le_bytes(next(&mut r)?);
    let seed = u64::from_le_bytes(next(&mut r)?);
    if modes > 1 << 20 || steps > 1 << 32 {
        return Err(NoiseError::Format(format!(
            "implausible dims {steps} x {modes}"
        )));
    }
    let mut read_block = |rows: usize| -> Result<Vec<f64>, NoiseError> {
        let mut v = vec![0.0; rows * modes];
        for k in 0..modes {
            for s in 0..rows {
                v[s * modes + k] = f64::from_le_bytes(next(&mut r)?);
            }
        }
        Ok(v)
    };
    let increments = read_block(steps)?;
    let z = read_block(steps + 1)?;
    let z_dot = read_block(steps + 1)?;
    Ok(NoisePath {
        dt,
        steps,
        modes,
        seed,
        increments,
        z,
        z_dot,
    })
}
