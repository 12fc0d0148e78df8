use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Truncated eigenstructure of the Dirichlet Laplacian on `(0, L)` together
/// with the diagonal noise spectrum.
///
/// Mode `k` (1-based in the mathematics, index `k - 1` here) has
/// eigenfunction `e_k(ξ) = sqrt(2/L) sin(kπξ/L)`, eigenvalue
/// `α_k = (kπ/L)²` of `-A`, and noise amplitude `λ_k = c · α_k^(-β)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    domain_length: f64,
    modes: usize,
    beta: f64,
    noise_scale: f64,
    space_dim: usize,
    eigenvalues: Vec<f64>,
    noise: Vec<f64>,
    admissible: bool,
}

impl SpectralConfig {
    pub fn new(
        domain_length: f64,
        modes: usize,
        beta: f64,
        noise_scale: f64,
        space_dim: usize,
    ) -> Result<Self> {
        if !(domain_length.is_finite() && domain_length > 0.0) {
            return Err(invalid("domain_length", "must be a positive real"));
        }
        if modes == 0 {
            return Err(invalid("modes", "at least one mode is required"));
        }
        if !beta.is_finite() {
            return Err(invalid("beta", "must be finite"));
        }
        if !(noise_scale.is_finite() && noise_scale > 0.0) {
            return Err(invalid("noise_scale", "must be a positive real"));
        }
        if space_dim == 0 {
            return Err(invalid("space_dim", "must be positive"));
        }
        let eigenvalues: Vec<f64> = (1..=modes)
            .map(|k| {
                let w = k as f64 * PI / domain_length;
                w * w
            })
            .collect();
        let noise = eigenvalues
            .iter()
            .map(|a| noise_scale * a.powf(-beta))
            .collect();
        let admissible = beta > (space_dim as f64 - 2.0) / 4.0;
        Ok(Self {
            domain_length,
            modes,
            beta,
            noise_scale,
            space_dim,
            eigenvalues,
            noise,
            admissible,
        })
    }

    /// Space-time white noise on `(0, π)`: `α_k = k²`, `λ_k = 1`.
    pub fn white_noise(modes: usize) -> Result<Self> {
        Self::new(PI, modes, 0.0, 1.0, 1)
    }

    pub fn domain_length(&self) -> f64 {
        self.domain_length
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn noise_scale(&self) -> f64 {
        self.noise_scale
    }

    pub fn space_dim(&self) -> usize {
        self.space_dim
    }

    /// `α_k`, strictly increasing.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `λ_k`, the eigenvalues of `Q`.
    pub fn noise(&self) -> &[f64] {
        &self.noise
    }

    /// Whether `β > (d - 2)/4`.
    pub fn is_admissible(&self) -> bool {
        self.admissible
    }

    pub fn alpha1(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Value of the eigenfunction `e_k` (0-based `k`) at `xi`.
    pub fn eigenfunction(&self, k: usize, xi: f64) -> f64 {
        let l = self.domain_length;
        (2.0 / l).sqrt() * ((k + 1) as f64 * PI * xi / l).sin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_noise_on_unit_interval() {
        let cfg = SpectralConfig::new(PI, 3, 0.0, 1.0, 1).unwrap();
        for (a, e) in cfg.eigenvalues().iter().zip([1.0, 4.0, 9.0]) {
            assert!((a - e).abs() < 1e-12);
        }
        assert_eq!(cfg.noise(), &[1.0, 1.0, 1.0]);
        assert!(cfg.is_admissible());
    }

    #[test]
    fn decaying_noise() {
        let cfg = SpectralConfig::new(PI, 2, 0.5, 1.0, 1).unwrap();
        assert!((cfg.noise()[0] - 1.0).abs() < 1e-12);
        assert!((cfg.noise()[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn three_dimensional_white_noise_is_not_admissible() {
        let cfg = SpectralConfig::new(PI, 2, 0.0, 1.0, 3).unwrap();
        assert!(!cfg.is_admissible());
        let cfg = SpectralConfig::new(PI, 2, 0.3, 1.0, 3).unwrap();
        assert!(cfg.is_admissible());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(SpectralConfig::new(PI, 0, 0.0, 1.0, 1).is_err());
        assert!(SpectralConfig::new(0.0, 3, 0.0, 1.0, 1).is_err());
        assert!(SpectralConfig::new(-1.0, 3, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn eigenvalues_increase() {
        let cfg = SpectralConfig::new(2.5, 40, 0.25, 0.7, 1).unwrap();
        assert!(cfg.eigenvalues().windows(2).all(|w| w[1] > w[0]));
        assert!(cfg.eigenvalues()[0] > 0.0);
        assert!(cfg.noise().iter().all(|&l| l > 0.0));
    }
}
