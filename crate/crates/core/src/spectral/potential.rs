use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::nonlinearity::{Collocation, PointwiseFn};
use super::{Field, Nonlinearity, SpectralConfig};
use crate::error::{Error, Result};

type ScalarFn = Arc<dyn Fn(&Field) -> f64 + Send + Sync>;
type GradientFn = Arc<dyn Fn(&Field) -> Field + Send + Sync>;

/// A potential `F` with gradient `DF`, candidate for `B = -Q² DF`.
#[derive(Clone)]
pub struct GradientPotential {
    value: ScalarFn,
    gradient: GradientFn,
}

impl fmt::Debug for GradientPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("GradientPotential { .. }")
    }
}

impl GradientPotential {
    pub fn new(value: ScalarFn, gradient: GradientFn) -> Self {
        Self { value, gradient }
    }

    pub fn zero() -> Self {
        Self::new(Arc::new(|_| 0.0), Arc::new(|x| Field::zeros(x.len())))
    }

    /// `F(x) = ½ Σ κ_k x_k² / λ_k²`, the potential of `B = -κ ∘ x`.
    pub fn linear_diagonal(cfg: &SpectralConfig, rates: &[f64]) -> Self {
        let k = cfg.modes();
        let weights: Arc<Vec<f64>> = Arc::new(
            (0..k)
                .map(|i| {
                    let r = if rates.len() == 1 {
                        rates[0]
                    } else {
                        rates.get(i).copied().unwrap_or(0.0)
                    };
                    r / (cfg.noise()[i] * cfg.noise()[i])
                })
                .collect(),
        );
        let w2 = weights.clone();
        Self::new(
            Arc::new(move |x| {
                0.5 * x
                    .coeffs()
                    .iter()
                    .zip(weights.iter())
                    .map(|(c, w)| w * c * c)
                    .sum::<f64>()
            }),
            Arc::new(move |x| {
                Field::from_vec_unchecked(
                    x.coeffs()
                        .iter()
                        .zip(w2.iter())
                        .map(|(c, w)| w * c)
                        .collect(),
                )
            }),
        )
    }

    /// `F(x) = -∫ G(ξ, x(ξ)) dξ` with `∂G/∂σ = b`, evaluated on the same
    /// collocation grid as the Nemytskii operator so that `DF = -B` holds to
    /// rounding when `Q = I`.
    pub fn nemytskii(cfg: &SpectralConfig, antiderivative: PointwiseFn, b: PointwiseFn) -> Self {
        let grid = Arc::new(Collocation::new(cfg));
        let g2 = grid.clone();
        Self::new(
            Arc::new(move |x| {
                let mut vals = vec![0.0; grid.points().len()];
                grid.synthesize(x.coeffs(), &mut vals);
                -grid.weight()
                    * vals
                        .iter()
                        .zip(grid.points())
                        .map(|(s, &xi)| antiderivative(xi, *s))
                        .sum::<f64>()
            }),
            Arc::new(move |x| {
                let mut vals = vec![0.0; g2.points().len()];
                g2.synthesize(x.coeffs(), &mut vals);
                for (v, &xi) in vals.iter_mut().zip(g2.points()) {
                    *v = -b(xi, *v);
                }
                let mut out = vec![0.0; x.len()];
                g2.analyze(&vals, &mut out);
                Field::from_vec_unchecked(out)
            }),
        )
    }

    /// Potential of `b(ξ, σ) = amplitude · sin σ`: `G(σ) = amplitude (1 - cos σ)`.
    pub fn sine(cfg: &SpectralConfig, amplitude: f64) -> Self {
        Self::nemytskii(
            cfg,
            Arc::new(move |_, s: f64| amplitude * (1.0 - s.cos())),
            Arc::new(move |_, s: f64| amplitude * s.sin()),
        )
    }

    /// Sum of potentials.
    pub fn sum(terms: Vec<GradientPotential>) -> Self {
        let t2 = terms.clone();
        Self::new(
            Arc::new(move |x| terms.iter().map(|t| t.value(x)).sum()),
            Arc::new(move |x| {
                let mut out = Field::zeros(x.len());
                for t in &t2 {
                    out.axpy(1.0, &t.gradient(x));
                }
                out
            }),
        )
    }

    pub fn value(&self, x: &Field) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &Field) -> Field {
        (self.gradient)(x)
    }

    /// Certifies the potential against `B` on random fields:
    /// `B(x) = -Q² DF(x)` to `1e-8` relative and `DF` against central
    /// differences of `F` to `1e-6` relative.
    pub fn certify(
        self,
        cfg: &SpectralConfig,
        b: &Nonlinearity,
        samples: usize,
        seed: u64,
    ) -> Result<CertifiedPotential> {
        let k = cfg.modes();
        let lam = cfg.noise();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let x = Field::from_vec_unchecked((0..k).map(|_| rng.gen_range(-1.5..1.5)).collect());
            let grad = self.gradient(&x);
            let bx = b.apply(&x);
            let scale = 1.0 + bx.norm();
            let mismatch: f64 = (0..k)
                .map(|i| {
                    let d = bx[i] + lam[i] * lam[i] * grad[i];
                    d * d
                })
                .sum::<f64>()
                .sqrt();
            if mismatch > 1e-8 * scale {
                return Err(Error::Uncertified(format!(
                    "B(x) + Q² DF(x) has norm {mismatch:.3e}"
                )));
            }
            let h = 1e-5;
            for i in 0..k {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (self.value(&xp) - self.value(&xm)) / (2.0 * h);
                if (fd - grad[i]).abs() > 1e-6 * (1.0 + grad.norm()) {
                    return Err(Error::Uncertified(format!(
                        "DF disagrees with finite differences in mode {i}: {} vs {fd}",
                        grad[i]
                    )));
                }
            }
        }
        Ok(CertifiedPotential { inner: self })
    }
}

/// A [`GradientPotential`] that passed [`GradientPotential::certify`].
#[derive(Debug, Clone)]
pub struct CertifiedPotential {
    inner: GradientPotential,
}

impl CertifiedPotential {
    pub fn value(&self, x: &Field) -> f64 {
        self.inner.value(x)
    }

    pub fn gradient(&self, x: &Field) -> Field {
        self.inner.gradient(x)
    }
}
