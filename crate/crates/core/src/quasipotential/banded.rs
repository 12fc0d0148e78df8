//! Symmetric positive definite banded matrices.

use crate::error::{Error, Result};

/// Lower band storage: `band[i * (p + 1) + j]` holds `A[i][i - j]`.
#[derive(Debug, Clone)]
pub(crate) struct Banded {
    n: usize,
    p: usize,
    band: Vec<f64>,
}

impl Banded {
    pub fn zeros(n: usize, p: usize) -> Self {
        Self {
            n,
            p,
            band: vec![0.0; n * (p + 1)],
        }
    }

    pub fn bandwidth(&self) -> usize {
        self.p
    }

    /// Adds `x` to `A[i][j]` (and implicitly `A[j][i]`).
    pub fn add(&mut self, i: usize, j: usize, x: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(hi - lo <= self.p, "entry outside the band");
        self.band[hi * (self.p + 1) + (hi - lo)] += x;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        if hi - lo > self.p {
            0.0
        } else {
            self.band[hi * (self.p + 1) + (hi - lo)]
        }
    }

    /// In-place Cholesky factorisation `A = L Lᵀ`.
    pub fn factor(mut self) -> Result<BandedCholesky> {
        let (n, p) = (self.n, self.p);
        let w = p + 1;
        for i in 0..n {
            let j0 = i.saturating_sub(p);
            for j in j0..=i {
                let mut s = self.band[i * w + (i - j)];
                let k0 = j0.max(j.saturating_sub(p));
                for k in k0..j {
                    s -= self.band[i * w + (i - k)] * self.band[j * w + (j - k)];
                }
                if j == i {
                    if !(s > 0.0) {
                        return Err(Error::IllConditioned(format!(
                            "banded matrix is not positive definite (pivot {i}: {s:e})"
                        )));
                    }
                    self.band[i * w] = s.sqrt();
                } else {
                    self.band[i * w + (i - j)] = s / self.band[j * w];
                }
            }
        }
        Ok(BandedCholesky { l: self })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BandedCholesky {
    l: Banded,
}

impl BandedCholesky {
    /// Overwrites `b` with `A^{-1} b`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let Banded { n, p, ref band } = self.l;
        let w = p + 1;
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(p)..i {
                s -= band[i * w + (i - k)] * b[k];
            }
            b[i] = s / band[i * w];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..(i + p + 1).min(n) {
                s -= band[k * w + (k - i)] * b[k];
            }
            b[i] = s / band[i * w];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_a_pentadiagonal_system() {
        let n = 40;
        let mut a = Banded::zeros(n, 2);
        for i in 0..n {
            a.add(i, i, 6.0);
            if i >= 1 {
                a.add(i, i - 1, -2.0);
            }
            if i >= 2 {
                a.add(i, i - 2, 0.5);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                b[i] += a.get(i, j) * x[j];
            }
        }
        a.factor().unwrap().solve_in_place(&mut b);
        for i in 0..n {
            assert!((b[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let mut a = Banded::zeros(2, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, 1.0);
        a.add(1, 0, 2.0);
        assert!(a.factor().is_err());
    }
}
