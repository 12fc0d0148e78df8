use std::ops::{Add, Index, IndexMut, Mul, Sub};

use serde::{Deserialize, Serialize};

use super::SpectralConfig;
use crate::error::{Error, Result};

/// Sine coefficients `x_k` of `x = Σ x_k e_k`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Field(Vec<f64>);

impl Field {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("field coefficients"));
        }
        Ok(Self(coeffs))
    }

    pub fn zeros(modes: usize) -> Self {
        Self(vec![0.0; modes])
    }

    /// The basis vector `e_k` (0-based `k`) scaled by `amplitude`.
    pub fn mode(modes: usize, k: usize, amplitude: f64) -> Self {
        let mut x = Self::zeros(modes);
        x.0[k] = amplitude;
        x
    }

    pub(crate) fn from_vec_unchecked(coeffs: Vec<f64>) -> Self {
        Self(coeffs)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn dot(&self, other: &Field) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// `|x|_H`, the `L²(D)` norm.
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `|x|_{H^δ} = sqrt(Σ α_k^δ x_k²)` for any real `δ`.
    pub fn sobolev_norm(&self, cfg: &SpectralConfig, delta: f64) -> f64 {
        self.sobolev_norm_sq(cfg, delta).sqrt()
    }

    pub fn sobolev_norm_sq(&self, cfg: &SpectralConfig, delta: f64) -> f64 {
        self.0
            .iter()
            .zip(cfg.eigenvalues())
            .map(|(x, a)| a.powf(delta) * x * x)
            .sum()
    }

    pub fn scaled(&self, s: f64) -> Field {
        Field(self.0.iter().map(|x| x * s).collect())
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &Field) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += s * b;
        }
    }

    pub fn check_len(&self, modes: usize) -> Result<()> {
        if self.len() != modes {
            return Err(Error::DimensionMismatch {
                expected: modes,
                got: self.len(),
            });
        }
        Ok(())
    }
}

impl Index<usize> for Field {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

impl IndexMut<usize> for Field {
    fn index_mut(&mut self, k: usize) -> &mut f64 {
        &mut self.0[k]
    }
}

impl Add<&Field> for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        Field(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub<&Field> for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        Field(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, s: f64) -> Field {
        self.scaled(s)
    }
}

/// A point `z = (u, v)` of the phase space `H^δ × H^(δ-1)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PhasePoint {
    pub u: Field,
    pub v: Field,
}

impl PhasePoint {
    pub fn new(u: Field, v: Field) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::DimensionMismatch {
                expected: u.len(),
                got: v.len(),
            });
        }
        Ok(Self { u, v })
    }

    pub fn zeros(modes: usize) -> Self {
        Self {
            u: Field::zeros(modes),
            v: Field::zeros(modes),
        }
    }

    pub fn modes(&self) -> usize {
        self.u.len()
    }

    /// `|z|²_{ℋ_δ} = |u|²_{H^δ} + |v|²_{H^(δ-1)}`.
    pub fn norm_sq(&self, cfg: &SpectralConfig, delta: f64) -> f64 {
        self.u.sobolev_norm_sq(cfg, delta) + self.v.sobolev_norm_sq(cfg, delta - 1.0)
    }

    pub fn norm(&self, cfg: &SpectralConfig, delta: f64) -> f64 {
        self.norm_sq(cfg, delta).sqrt()
    }

    /// The energy norm of `ℋ = H × H^{-1}`.
    pub fn energy_norm(&self, cfg: &SpectralConfig) -> f64 {
        self.norm(cfg, 0.0)
    }

    /// `I_μ(u, v) = (u, √μ v)`.
    pub fn mass_scaled(&self, mu: f64) -> PhasePoint {
        PhasePoint {
            u: self.u.clone(),
            v: self.v.scaled(mu.sqrt()),
        }
    }

    /// Inverse of [`PhasePoint::mass_scaled`].
    pub fn mass_unscaled(&self, mu: f64) -> PhasePoint {
        PhasePoint {
            u: self.u.clone(),
            v: self.v.scaled(1.0 / mu.sqrt()),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}
