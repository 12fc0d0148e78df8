use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Path, TimeGrid};
use crate::error::{invalid, Result};
use crate::quadrature::{simpson_weights, CompositeGauss};
use crate::spectral::Field;

fn bump(t: f64) -> f64 {
    let s = t - 1.0;
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

fn bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| CompositeGauss::new(0.0, 2.0, 400, 20).integrate(bump))
}

/// The profile `ρ_μ(t) = μ^{-α} ρ(t / μ^α)` built from the normalised bump
/// `ρ(t) ∝ exp(-1/(1-(t-1)²))` on `(0, 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MollifierSpec {
    pub alpha_exponent: f64,
}

impl Default for MollifierSpec {
    fn default() -> Self {
        Self {
            alpha_exponent: 0.5,
        }
    }
}

impl MollifierSpec {
    pub fn new(alpha_exponent: f64) -> Result<Self> {
        if !(alpha_exponent > 0.0 && alpha_exponent < 1.0) {
            return Err(invalid("alpha_exponent", "must lie in (0, 1)"));
        }
        Ok(Self { alpha_exponent })
    }

    /// Half-width scale `μ^α`; the support of `ρ_μ` is `[0, 2μ^α]`.
    pub fn width(&self, mu: f64) -> f64 {
        mu.powf(self.alpha_exponent)
    }

    /// `ρ(t)`, normalised to unit mass.
    pub fn profile(t: f64) -> f64 {
        bump(t) / bump_mass()
    }

    pub fn density(&self, mu: f64, t: f64) -> f64 {
        let w = self.width(mu);
        Self::profile(t / w) / w
    }

    /// `∫ ρ_μ` by composite Simpson with `n` intervals over the support.
    pub fn integral(&self, mu: f64, n: usize) -> f64 {
        let top = 2.0 * self.width(mu);
        let h = top / n as f64;
        simpson_weights(n, h)
            .iter()
            .enumerate()
            .map(|(i, w)| w * self.density(mu, i as f64 * h))
            .sum()
    }

    /// `∫ τ ρ(τ) dτ`, equal to 1 by the symmetry of the bump.
    pub fn first_moment() -> f64 {
        CompositeGauss::new(0.0, 2.0, 400, 20).integrate(|t| t * Self::profile(t))
    }
}

/// Result of [`mollify`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mollified {
    pub path: Path,
    /// Some nodes needed values before the start of the path, which were
    /// taken equal to the first state.
    pub history_clamped: bool,
}

/// `φ_μ(t) = ∫ ρ_μ(t - s) φ(s) ds = ∫_0^{2μ^α} ρ_μ(τ) φ(t - τ) dτ`.
///
/// Composite Simpson in `τ` on the path's own step, with the discrete
/// weights normalised to unit mass so that constants are reproduced
/// exactly. The support must span at least eight steps.
pub fn mollify(phi: &Path, spec: &MollifierSpec, mu: f64) -> Result<Mollified> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(invalid("mu", "must be a positive real"));
    }
    let grid: TimeGrid = *phi.grid();
    let h = grid.dt();
    let support = 2.0 * spec.width(mu);
    if support > grid.t_end() - grid.t_start() {
        return Err(invalid(
            "mu",
            "the mollifier support exceeds the path duration",
        ));
    }
    let mut m = (support / h).ceil() as usize;
    if m < 8 {
        return Err(invalid(
            "mu",
            "the mollifier support is not resolved by the path grid",
        ));
    }
    m += m % 2;
    let sw = simpson_weights(m, h);
    let mut kernel: Vec<f64> = (0..=m)
        .map(|j| sw[j] * spec.density(mu, j as f64 * h))
        .collect();
    let mass: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|w| *w /= mass);

    let modes = phi.modes();
    let mut clamped = false;
    let positions = phi.positions();
    let mollified: Vec<Field> = (0..grid.nodes())
        .map(|i| {
            let mut acc = vec![0.0; modes];
            for (j, w) in kernel.iter().enumerate() {
                if *w == 0.0 {
                    continue;
                }
                let src = if j > i {
                    clamped = true;
                    0
                } else {
                    i - j
                };
                for (a, x) in acc.iter_mut().zip(positions[src].coeffs()) {
                    *a += w * x;
                }
            }
            Field::from_vec_unchecked(acc)
        })
        .collect();
    Ok(Mollified {
        path: Path::heat(grid, mollified)?,
        history_clamped: clamped,
    })
}

/// `|φ_μ''|_{L²} μ^α / |φ'|_{L²}` over the nodes whose mollifier window
/// lies inside the path, with central differences for both derivatives.
pub fn second_derivative_ratio(phi: &Path, spec: &MollifierSpec, mu: f64) -> Result<f64> {
    let smooth = mollify(phi, spec, mu)?.path;
    let grid = phi.grid();
    let h = grid.dt();
    let first = ((2.0 * spec.width(mu)) / h).ceil() as usize + 2;
    let n = grid.n_steps();
    if first + 2 >= n {
        return Err(invalid("path", "too short for the mollifier window"));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for i in first..n {
        let (a, b, c) = (
            smooth.position(i - 1),
            smooth.position(i),
            smooth.position(i + 1),
        );
        let d2: f64 = (0..phi.modes())
            .map(|k| {
                let x = (a[k] - 2.0 * b[k] + c[k]) / (h * h);
                x * x
            })
            .sum();
        let (p, q) = (phi.position(i - 1), phi.position(i + 1));
        let d1: f64 = (0..phi.modes())
            .map(|k| {
                let x = (q[k] - p[k]) / (2.0 * h);
                x * x
            })
            .sum();
        num += h * d2;
        den += h * d1;
    }
    Ok((num / den).sqrt() * spec.width(mu))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_mass_and_support() {
        let spec = MollifierSpec::default();
        for mu in [1e-1, 1e-2, 1e-3] {
            assert!((spec.integral(mu, 2000) - 1.0).abs() < 1e-12);
            assert_eq!(spec.density(mu, 2.0 * spec.width(mu) * 1.000001), 0.0);
            assert_eq!(spec.density(mu, -1e-9), 0.0);
        }
        assert!((MollifierSpec::first_moment() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn constants_are_fixed_points() {
        let grid = TimeGrid::new(-2.0, 0.0, 2000).unwrap();
        let c = Field::new(vec![0.3, -1.2]).unwrap();
        let p = Path::from_fn(grid, |_| c.clone()).unwrap();
        let m = mollify(&p, &MollifierSpec::default(), 0.01).unwrap();
        for x in m.path.positions() {
            assert!((x - &c).norm() < 1e-14);
        }
        assert!(m.history_clamped);
    }

    #[test]
    fn linear_path_is_delayed_by_the_first_moment() {
        let grid = TimeGrid::new(-2.0, 0.0, 4000).unwrap();
        let p = Path::from_fn(grid, |t| Field::mode(1, 0, t)).unwrap();
        let mu = 0.01;
        let spec = MollifierSpec::default();
        let m = mollify(&p, &spec, mu).unwrap().path;
        let shift = spec.width(mu) * MollifierSpec::first_moment();
        for (i, t) in grid.times().enumerate().skip(500) {
            assert!((m.position(i)[0] - (t - shift)).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_unresolved_support() {
        let grid = TimeGrid::new(-1.0, 0.0, 10).unwrap();
        let p = Path::from_fn(grid, |t| Field::mode(1, 0, t)).unwrap();
        assert!(mollify(&p, &MollifierSpec::default(), 1e-4).is_err());
    }
}
