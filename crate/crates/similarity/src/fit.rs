use crate::{Result, SimilarityError};

/// Windows whose fitted `d(T-t)/dt` is further than this from `-1` are not
/// self-similar growth and are rejected.
const MAX_SLOPE_DEVIATION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Samples per least-squares window.
    pub window: usize,
    /// Most recent samples left out of every window.
    pub exclude_last: usize,
    /// Number of successively older windows (offset by half a window) fitted
    /// for the drift diagnostic.
    pub drift_windows: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            window: 50,
            exclude_last: 5,
            drift_windows: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TTildeEstimate {
    pub t_hat: f64,
    /// Fitted `d(T-t)/dt`; `-1` for exact self-similar growth.
    pub slope: f64,
    /// Newest first; entry 0 is `t_hat`.
    pub window_estimates: Vec<f64>,
    /// `|estimate[0] - estimate[1]|`, zero with a single window.
    pub drift: f64,
}

/// Blowup time from the central law `u(t, r₀) = Φ(r₀/(T-t))/(T-t)`.
///
/// Inverting `Φ` gives `T - t = r₀ / (√(d-2) tan(u r₀ / 2))` exactly, which is
/// fitted by a straight line in `t`; `T̂` is its zero.
#[allow(non_snake_case)]
pub fn estimate_T_tilde(
    times: &[f64],
    central: &[f64],
    r0: f64,
    d: usize,
    opts: FitOptions,
) -> Result<TTildeEstimate> {
    if times.len() != central.len() {
        return Err(SimilarityError::Domain(format!(
            "{} times but {} central values",
            times.len(),
            central.len()
        )));
    }
    if opts.window < 3 || d < 3 || !(r0 > 0.0) {
        return Err(SimilarityError::Domain(
            "fit needs window >= 3, d >= 3, r0 > 0".into(),
        ));
    }
    let end = times.len().saturating_sub(opts.exclude_last);
    if end < opts.window {
        return Err(SimilarityError::FitRejected(format!(
            "{} samples, {} needed",
            times.len(),
            opts.window + opts.exclude_last
        )));
    }
    let sa = ((d - 2) as f64).sqrt();
    let fit = |stop: usize| -> Result<(f64, f64)> {
        let range = stop - opts.window..stop;
        let (ts, us) = (&times[range.clone()], &central[range]);
        if us.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SimilarityError::FitRejected(
                "central value is not strictly increasing over the window".into(),
            ));
        }
        let mut ys = Vec::with_capacity(us.len());
        for &u in us {
            let half = 0.5 * u * r0;
            if !(half > 0.0 && half < std::f64::consts::FRAC_PI_2) {
                return Err(SimilarityError::FitRejected(format!(
                    "central value {u} is outside the range of the profile law"
                )));
            }
            ys.push(r0 / (sa * half.tan()));
        }
        let nf = ts.len() as f64;
        let mt = ts.iter().sum::<f64>() / nf;
        let my = ys.iter().sum::<f64>() / nf;
        let stt: f64 = ts.iter().map(|t| (t - mt) * (t - mt)).sum();
        let sty: f64 = ts.iter().zip(&ys).map(|(t, y)| (t - mt) * (y - my)).sum();
        let slope = sty / stt;
        let t_hat = mt - my / slope;
        if !(slope < 0.0 && t_hat.is_finite() && t_hat > ts[ts.len() - 1]) {
            return Err(SimilarityError::FitRejected(format!(
                "no growth toward a finite time (slope {slope})"
            )));
        }
        if (slope + 1.0).abs() > MAX_SLOPE_DEVIATION {
            return Err(SimilarityError::FitRejected(format!(
                "growth is not self-similar (slope {slope}, expected -1)"
            )));
        }
        Ok((t_hat, slope))
    };
    let (t_hat, slope) = fit(end)?;
    let mut window_estimates = vec![t_hat];
    let shift = (opts.window / 2).max(1);
    for k in 1..opts.drift_windows {
        let stop = match end.checked_sub(k * shift) {
            Some(s) if s >= opts.window => s,
            _ => break,
        };
        match fit(stop) {
            Ok((t, _)) => window_estimates.push(t),
            Err(_) => break,
        }
    }
    let drift = if window_estimates.len() > 1 {
        (window_estimates[0] - window_estimates[1]).abs()
    } else {
        0.0
    };
    Ok(TTildeEstimate {
        t_hat,
        slope,
        window_estimates,
        drift,
    })
}
