//! Banded symmetric positive definite storage and Cholesky factorization.

/// Lower band of a symmetric matrix: entries `(i, j)` with `i - bw <= j <= i`.
#[derive(Debug, Clone)]
pub struct SpdBandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SpdBandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        SpdBandMatrix {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (self.bw - (i - j))
    }

    /// Set the entry at `(i, j)`, `j <= i`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for yi in y.iter_mut() {
            *yi = 0.0;
        }
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let row = &self.data[i * (self.bw + 1)..(i + 1) * (self.bw + 1)];
            let mut acc = 0.0;
            for j in lo..i {
                let a = row[self.bw - (i - j)];
                acc += a * x[j];
                y[j] += a * x[i];
            }
            acc += row[self.bw] * x[i];
            y[i] += acc;
        }
    }

    /// In-place banded Cholesky `A = L L^T`.
    pub fn factor(mut self) -> Result<BandCholesky, String> {
        let bw = self.bw;
        let w = bw + 1;
        for i in 0..self.n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let jlo = j.saturating_sub(bw).max(lo);
                let mut s = self.data[i * w + (bw - (i - j))];
                for k in jlo..j {
                    s -= self.data[i * w + (bw - (i - k))] * self.data[j * w + (bw - (j - k))];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(format!("non-positive pivot {s} at row {i}"));
                    }
                    self.data[i * w + bw] = s.sqrt();
                } else {
                    self.data[i * w + (bw - (i - j))] = s / self.data[j * w + bw];
                }
            }
        }
        Ok(BandCholesky {
            n: self.n,
            bw,
            l: self.data,
        })
    }
}

#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (bw, w) = (self.bw, self.bw + 1);
        for i in 0..self.n {
            let lo = i.saturating_sub(bw);
            let mut s = b[i];
            for k in lo..i {
                s -= self.l[i * w + (bw - (i - k))] * b[k];
            }
            b[i] = s / self.l[i * w + bw];
        }
        for i in (0..self.n).rev() {
            let hi = (i + bw).min(self.n - 1);
            let mut s = b[i];
            for k in i + 1..=hi {
                s -= self.l[k * w + (bw - (k - i))] * b[k];
            }
            b[i] = s / self.l[i * w + bw];
        }
    }
}

/// Factor, solve and report the relative residual `|Ax - b|_inf / max(|b|_inf, 1)`.
pub fn solve_checked(a: &SpdBandMatrix, b: &[f64]) -> Result<(Vec<f64>, f64), String> {
    let chol = a.clone().factor()?;
    let mut x = b.to_vec();
    chol.solve_in_place(&mut x);
    let res = residual(a, &x, b);
    Ok((x, res))
}

pub fn residual(a: &SpdBandMatrix, x: &[f64], b: &[f64]) -> f64 {
    let mut ax = vec![0.0; b.len()];
    a.matvec(x, &mut ax);
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    ax.iter()
        .zip(b)
        .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()))
        / scale
}
