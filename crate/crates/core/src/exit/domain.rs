use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::spectral::{Nonlinearity, SpectralConfig};

/// The domain `G` that the position component must leave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExitDomain {
    /// `{ |u|_H < radius }`.
    Ball { radius: f64 },
    /// `{ u_k < level }` for the 0-based mode index `mode`.
    Halfspace { mode: usize, level: f64 },
}

impl ExitDomain {
    pub fn validate(&self, modes: usize) -> Result<()> {
        match *self {
            ExitDomain::Ball { radius } => {
                if !(radius.is_finite() && radius > 0.0) {
                    return Err(invalid("radius", "must be a positive real"));
                }
            }
            ExitDomain::Halfspace { mode, level } => {
                if mode >= modes {
                    return Err(invalid(
                        "mode",
                        format!("must be below the mode count {modes}"),
                    ));
                }
                if !(level.is_finite() && level > 0.0) {
                    return Err(invalid("level", "must be positive so that 0 lies inside"));
                }
            }
        }
        Ok(())
    }

    /// Signed distance to `∂G`, negative inside. Both variants are
    /// 1-Lipschitz in `H`.
    pub fn boundary_distance(&self, u: &[f64]) -> f64 {
        match *self {
            ExitDomain::Ball { radius } => u.iter().map(|x| x * x).sum::<f64>().sqrt() - radius,
            ExitDomain::Halfspace { mode, level } => u[mode] - level,
        }
    }

    /// Nearest boundary point along the crossing: radial projection for a
    /// ball, the level set coordinate for a halfspace.
    pub(crate) fn project(&self, u: &mut [f64]) {
        match *self {
            ExitDomain::Ball { radius } => {
                let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                if n > 0.0 {
                    u.iter_mut().for_each(|x| *x *= radius / n);
                }
            }
            ExitDomain::Halfspace { mode, level } => u[mode] = level,
        }
    }

    /// `inf_{∂G} V` in closed form when `B = -κ ∘ x` is linear and
    /// diagonal, where `V(x) = Σ (α_k + κ_k) x_k² / λ_k²` for the heat and
    /// every wave system alike. `None` for other nonlinearities.
    pub fn boundary_potential(&self, cfg: &SpectralConfig, b: &Nonlinearity) -> Option<f64> {
        let c = quadratic_weights(cfg, b)?;
        Some(match *self {
            ExitDomain::Ball { radius } => {
                radius * radius * c.iter().cloned().fold(f64::INFINITY, f64::min)
            }
            ExitDomain::Halfspace { mode, level } => level * level * c[mode],
        })
    }
}

/// Weights `(α_k + κ_k)/λ_k²` of the quadratic quasi-potential.
pub(crate) fn quadratic_weights(cfg: &SpectralConfig, b: &Nonlinearity) -> Option<Vec<f64>> {
    let rates = b.diagonal_rates(cfg.modes())?;
    Some(
        cfg.eigenvalues()
            .iter()
            .zip(cfg.noise())
            .zip(rates)
            .map(|((a, l), k)| (a + k) / (l * l))
            .collect(),
    )
}
