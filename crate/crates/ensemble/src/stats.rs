use serde::Serialize;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `k` successes out of `n` at normal quantile `z`.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    // the exact endpoints at k = 0 and k = n
    let lo = if k == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let hi = if k == n {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Values outside `[edges[0], edges[last]]`.
    pub outside: usize,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize, values: impl IntoIterator<Item = f64>) -> Self {
        let edges: Vec<f64> = (0..=bins)
            .map(|i| lo + (hi - lo) * i as f64 / bins as f64)
            .collect();
        let mut counts = vec![0; bins];
        let mut outside = 0;
        for v in values {
            if !(v >= lo && v <= hi) {
                outside += 1;
                continue;
            }
            let i = (((v - lo) / (hi - lo)) * bins as f64).floor() as usize;
            counts[i.min(bins - 1)] += 1;
        }
        Self {
            edges,
            counts,
            outside,
        }
    }
}

/// Profile discrepancy over the blowup paths that produced one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscrepancySummary {
    pub count: usize,
    pub mean_final: Option<f64>,
    pub max_final: Option<f64>,
    /// Paths whose discrepancy decreased over the measured tail.
    pub decreasing: usize,
}
