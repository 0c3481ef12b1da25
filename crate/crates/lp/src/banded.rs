/// Square band matrix, entry `(i, j)` stored for `-kl ≤ j - i ≤ ku`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i < self.n && j < self.n && self.in_band(i, j) {
            self.data[i * self.width() + j + self.kl - i]
        } else {
            0.0
        }
    }

    /// Panics outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside the band");
        let w = self.width();
        self.data[i * w + j + self.kl - i] = v;
    }

    /// Assemble from dense columns `col(j)`; the band is the nonzero pattern.
    pub fn from_columns<F: FnMut(usize) -> Vec<f64>>(n: usize, mut col: F) -> Self {
        let cols: Vec<Vec<f64>> = (0..n).map(&mut col).collect();
        let (mut kl, mut ku) = (0, 0);
        for (j, c) in cols.iter().enumerate() {
            for (i, v) in c.iter().enumerate() {
                if *v != 0.0 {
                    if i > j {
                        kl = kl.max(i - j);
                    } else {
                        ku = ku.max(j - i);
                    }
                }
            }
        }
        let mut m = Self::zeros(n, kl, ku);
        for (j, c) in cols.iter().enumerate() {
            for (i, v) in c.iter().enumerate() {
                if *v != 0.0 {
                    m.set(i, j, *v);
                }
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n, self.ku, self.kl);
        for i in 0..self.n {
            for j in i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n) {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn shifted(&self, mu: f64) -> Self {
        let mut s = self.clone();
        for i in 0..self.n {
            s.set(i, i, self.get(i, i) - mu);
        }
        s
    }

    /// `out = A x`.
    pub fn mul_into(&self, x: &[f64], out: &mut [f64]) {
        let w = self.width();
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku + 1).min(self.n);
            let row = &self.data[i * w..(i + 1) * w];
            let off = self.kl + lo - i;
            out[i] = row[off..off + hi - lo]
                .iter()
                .zip(&x[lo..hi])
                .map(|(a, b)| a * b)
                .sum();
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.mul_into(x, &mut out);
        out
    }

    /// LU with partial pivoting; `None` when a pivot vanishes.
    pub fn lu(&self) -> Option<BandLu> {
        let (n, kl) = (self.n, self.kl);
        let ku = self.kl + self.ku;
        let w = kl + ku + 1;
        let mut a = vec![0.0; n * w];
        for i in 0..n {
            for j in i.saturating_sub(kl)..(i + self.ku + 1).min(n) {
                a[i * w + j + kl - i] = self.get(i, j);
            }
        }
        let at = |i: usize, j: usize| i * w + j + kl - i;
        let mut piv = vec![0; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let p = (k..=last)
                .max_by(|&x, &y| a[at(x, k)].abs().total_cmp(&a[at(y, k)].abs()))
                .expect("non-empty pivot range");
            piv[k] = p;
            if a[at(p, k)] == 0.0 {
                return None;
            }
            let right = (k + ku).min(n - 1);
            if p != k {
                for j in k..=right {
                    a.swap(at(k, j), at(p, j));
                }
            }
            let d = a[at(k, k)];
            for i in k + 1..=last {
                let l = a[at(i, k)] / d;
                a[at(i, k)] = l;
                if l != 0.0 {
                    for j in k + 1..=right {
                        a[at(i, j)] -= l * a[at(k, j)];
                    }
                }
            }
        }
        Some(BandLu { n, kl, ku, a, piv })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    a: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * (self.kl + self.ku + 1) + j + self.kl - i]
    }

    /// Overwrites `b` with `A⁻¹ b`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            b.swap(k, self.piv[k]);
            let bk = b[k];
            for i in k + 1..=(k + self.kl).min(n - 1) {
                b[i] -= self.at(i, k) * bk;
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + self.ku).min(n - 1) {
                s -= self.at(i, j) * b[j];
            }
            b[i] = s / self.at(i, i);
        }
    }
}
