use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Field, SpectralConfig};
use crate::error::{invalid, Error, Result};

/// A pointwise reaction term `b(ξ, σ)`.
pub type PointwiseFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Sine-transform collocation grid used to evaluate Nemytskii operators.
///
/// With `N = 2(K + 1)` intervals the interior points `ξ_j = jL/N`,
/// `j = 1..N-1`, carry a discrete sine transform that is exact for every
/// mode up to `N - 1`, so the upper half of the grid acts as zero padding
/// against aliasing of the pointwise product.
#[derive(Debug, Clone, PartialEq)]
pub struct Collocation {
    points: Vec<f64>,
    // basis[j * modes + k] = e_k(ξ_j)
    basis: Vec<f64>,
    weight: f64,
    modes: usize,
}

impl Collocation {
    pub fn new(cfg: &SpectralConfig) -> Self {
        let modes = cfg.modes();
        let intervals = 2 * (modes + 1);
        let h = cfg.domain_length() / intervals as f64;
        let points: Vec<f64> = (1..intervals).map(|j| j as f64 * h).collect();
        let mut basis = Vec::with_capacity(points.len() * modes);
        for &xi in &points {
            for k in 0..modes {
                basis.push(cfg.eigenfunction(k, xi));
            }
        }
        Self {
            points,
            basis,
            weight: h,
            modes,
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Quadrature weight of each collocation point.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Pointwise values `x(ξ_j)`.
    pub fn synthesize(&self, coeffs: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let row = &self.basis[j * self.modes..(j + 1) * self.modes];
            *o = row.iter().zip(coeffs).map(|(e, c)| e * c).sum();
        }
    }

    /// Sine coefficients of a function given by its collocation values.
    pub fn analyze(&self, values: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (j, &f) in values.iter().enumerate() {
            let row = &self.basis[j * self.modes..(j + 1) * self.modes];
            for (o, e) in out.iter_mut().zip(row) {
                *o += self.weight * f * e;
            }
        }
    }
}

/// Nemytskii operator `B(x)(ξ) = b(ξ, x(ξ))`.
#[derive(Clone)]
pub struct Nemytskii {
    b: PointwiseFn,
    db: Option<PointwiseFn>,
    lipschitz: f64,
    grid: Arc<Collocation>,
}

impl Nemytskii {
    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz
    }

    pub fn grid(&self) -> &Collocation {
        &self.grid
    }

    pub fn eval(&self, xi: f64, sigma: f64) -> f64 {
        (self.b)(xi, sigma)
    }

    /// `∂b/∂σ`, falling back to a central difference.
    pub fn eval_derivative(&self, xi: f64, sigma: f64) -> f64 {
        match &self.db {
            Some(db) => db(xi, sigma),
            None => {
                let h = 1e-6 * sigma.abs().max(1.0);
                ((self.b)(xi, sigma + h) - (self.b)(xi, sigma - h)) / (2.0 * h)
            }
        }
    }
}

impl fmt::Debug for Nemytskii {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nemytskii")
            .field("lipschitz", &self.lipschitz)
            .field("collocation_points", &self.grid.points.len())
            .finish()
    }
}

/// The reaction term `B` of the wave and heat systems.
#[derive(Debug, Clone)]
pub enum Nonlinearity {
    Zero,
    /// `B(x) = -κ ∘ x`, one rate per mode (a single entry broadcasts).
    LinearDiagonal(Vec<f64>),
    Nemytskii(Nemytskii),
    /// Sum of several terms, e.g. a diagonal damping plus a mode-mixing
    /// pointwise reaction.
    Sum(Vec<Nonlinearity>),
}

impl Nonlinearity {
    pub fn linear(rate: f64) -> Self {
        Nonlinearity::LinearDiagonal(vec![rate])
    }

    pub fn linear_per_mode(rates: Vec<f64>) -> Self {
        Nonlinearity::LinearDiagonal(rates)
    }

    /// Builds a Nemytskii operator and spot-checks it: `B(0) = 0` and the
    /// pointwise Lipschitz ratio must stay within 10% of `lipschitz`.
    pub fn nemytskii(cfg: &SpectralConfig, b: PointwiseFn, lipschitz: f64) -> Result<Self> {
        Self::nemytskii_with_derivative(cfg, b, None, lipschitz)
    }

    pub fn nemytskii_with_derivative(
        cfg: &SpectralConfig,
        b: PointwiseFn,
        db: Option<PointwiseFn>,
        lipschitz: f64,
    ) -> Result<Self> {
        if !(lipschitz.is_finite() && lipschitz >= 0.0) {
            return Err(invalid("lipschitz", "must be a non-negative real"));
        }
        let n = Nemytskii {
            b,
            db,
            lipschitz,
            grid: Arc::new(Collocation::new(cfg)),
        };
        let observed = pointwise_lipschitz_probe(&n, cfg.domain_length(), 4096, 0x5eed);
        if observed > 1.1 * lipschitz {
            return Err(Error::LipschitzViolation {
                declared: lipschitz,
                observed,
            });
        }
        let out = Nonlinearity::Nemytskii(n);
        let at_zero = out.apply(&Field::zeros(cfg.modes())).norm();
        if at_zero > 1e-12 {
            return Err(Error::NonzeroAtOrigin(at_zero));
        }
        Ok(out)
    }

    /// `b(ξ, σ) = amplitude · sin(σ)`, Lipschitz constant `|amplitude|`.
    pub fn sine(cfg: &SpectralConfig, amplitude: f64) -> Result<Self> {
        Self::nemytskii_with_derivative(
            cfg,
            Arc::new(move |_, s: f64| amplitude * s.sin()),
            Some(Arc::new(move |_, s: f64| amplitude * s.cos())),
            amplitude.abs(),
        )
    }

    /// `b(ξ, σ) = amplitude · tanh(σ)`.
    pub fn tanh(cfg: &SpectralConfig, amplitude: f64) -> Result<Self> {
        Self::nemytskii_with_derivative(
            cfg,
            Arc::new(move |_, s: f64| amplitude * s.tanh()),
            Some(Arc::new(move |_, s: f64| {
                let c = s.cosh();
                amplitude / (c * c)
            })),
            amplitude.abs(),
        )
    }

    /// Declared Lipschitz constant `γ₀` in `H`.
    pub fn lipschitz_bound(&self) -> f64 {
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::LinearDiagonal(r) => r.iter().fold(0.0, |m, x| m.max(x.abs())),
            Nonlinearity::Nemytskii(n) => n.lipschitz,
            Nonlinearity::Sum(terms) => terms.iter().map(|t| t.lipschitz_bound()).sum(),
        }
    }

    /// Per-mode damping rates `κ` when `B = -κ ∘ x` is diagonal and linear.
    pub fn diagonal_rates(&self, modes: usize) -> Option<Vec<f64>> {
        match self {
            Nonlinearity::Zero => Some(vec![0.0; modes]),
            Nonlinearity::LinearDiagonal(r) => Some((0..modes).map(|k| rate_at(r, k)).collect()),
            Nonlinearity::Nemytskii(_) => None,
            Nonlinearity::Sum(terms) => terms.iter().try_fold(vec![0.0; modes], |mut acc, t| {
                for (a, r) in acc.iter_mut().zip(t.diagonal_rates(modes)?) {
                    *a += r;
                }
                Some(acc)
            }),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Nonlinearity::Zero => true,
            Nonlinearity::LinearDiagonal(r) => r.iter().all(|&x| x == 0.0),
            Nonlinearity::Nemytskii(_) => false,
            Nonlinearity::Sum(terms) => terms.iter().all(|t| t.is_zero()),
        }
    }

    pub fn apply(&self, x: &Field) -> Field {
        let mut out = vec![0.0; x.len()];
        self.apply_into(x.coeffs(), &mut out);
        Field::from_vec_unchecked(out)
    }

    /// Overwrites `out` with `B(x)`.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        self.accumulate(x, out);
    }

    fn accumulate(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Nonlinearity::Zero => {}
            Nonlinearity::LinearDiagonal(rates) => {
                for (k, (o, xk)) in out.iter_mut().zip(x).enumerate() {
                    *o -= rate_at(rates, k) * xk;
                }
            }
            Nonlinearity::Nemytskii(n) => {
                let grid = &n.grid;
                let mut values = vec![0.0; grid.points.len()];
                grid.synthesize(x, &mut values);
                for (v, &xi) in values.iter_mut().zip(&grid.points) {
                    *v = (n.b)(xi, *v);
                }
                let mut coeffs = vec![0.0; out.len()];
                grid.analyze(&values, &mut coeffs);
                for (o, c) in out.iter_mut().zip(coeffs) {
                    *o += c;
                }
            }
            Nonlinearity::Sum(terms) => {
                for t in terms {
                    t.accumulate(x, out);
                }
            }
        }
    }

    /// Overwrites `out` with `DB(x)ᵀ w`.
    pub fn jacobian_transpose_apply(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        self.accumulate_jt(x, w, out);
    }

    fn accumulate_jt(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        match self {
            Nonlinearity::Zero => {}
            Nonlinearity::LinearDiagonal(rates) => {
                for (k, (o, wk)) in out.iter_mut().zip(w).enumerate() {
                    *o -= rate_at(rates, k) * wk;
                }
            }
            Nonlinearity::Nemytskii(n) => {
                let grid = &n.grid;
                let np = grid.points.len();
                let mut sigma = vec![0.0; np];
                let mut wv = vec![0.0; np];
                grid.synthesize(x, &mut sigma);
                grid.synthesize(w, &mut wv);
                for j in 0..np {
                    wv[j] *= n.eval_derivative(grid.points[j], sigma[j]);
                }
                let mut coeffs = vec![0.0; out.len()];
                grid.analyze(&wv, &mut coeffs);
                for (o, c) in out.iter_mut().zip(coeffs) {
                    *o += c;
                }
            }
            Nonlinearity::Sum(terms) => {
                for t in terms {
                    t.accumulate_jt(x, w, out);
                }
            }
        }
    }

    /// Diagonal of the Jacobian `DB(0)` in the sine basis.
    pub fn linearization_diagonal(&self, modes: usize) -> Vec<f64> {
        let mut d = vec![0.0; modes];
        self.accumulate_diag(&mut d);
        d
    }

    fn accumulate_diag(&self, d: &mut [f64]) {
        match self {
            Nonlinearity::Zero => {}
            Nonlinearity::LinearDiagonal(rates) => {
                for (k, dk) in d.iter_mut().enumerate() {
                    *dk -= rate_at(rates, k);
                }
            }
            Nonlinearity::Nemytskii(n) => {
                let grid = &n.grid;
                let m = grid.modes;
                for (j, &xi) in grid.points.iter().enumerate() {
                    let slope = n.eval_derivative(xi, 0.0);
                    for (k, dk) in d.iter_mut().enumerate() {
                        let e = grid.basis[j * m + k];
                        *dk += grid.weight * slope * e * e;
                    }
                }
            }
            Nonlinearity::Sum(terms) => {
                for t in terms {
                    t.accumulate_diag(d);
                }
            }
        }
    }

    /// Largest observed `|B(x) - B(y)|_H / |x - y|_H` over random field
    /// pairs drawn with coefficients in `[-scale, scale]`.
    pub fn lipschitz_spot_check(
        &self,
        cfg: &SpectralConfig,
        samples: usize,
        scale: f64,
        seed: u64,
    ) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = cfg.modes();
        let mut worst = 0.0f64;
        for _ in 0..samples {
            let x =
                Field::from_vec_unchecked((0..k).map(|_| rng.gen_range(-scale..scale)).collect());
            let y =
                Field::from_vec_unchecked((0..k).map(|_| rng.gen_range(-scale..scale)).collect());
            let d = (&x - &y).norm();
            if d > 0.0 {
                worst = worst.max((&self.apply(&x) - &self.apply(&y)).norm() / d);
            }
        }
        worst
    }

    /// Flags a violation when the observed ratio exceeds the declared bound
    /// by more than 10%.
    pub fn verify_lipschitz(&self, cfg: &SpectralConfig, samples: usize, seed: u64) -> Result<f64> {
        let observed = self.lipschitz_spot_check(cfg, samples, 2.0, seed);
        let declared = self.lipschitz_bound();
        if observed > 1.1 * declared + 1e-12 {
            return Err(Error::LipschitzViolation { declared, observed });
        }
        Ok(observed)
    }
}

fn rate_at(rates: &[f64], k: usize) -> f64 {
    if rates.len() == 1 {
        rates[0]
    } else {
        rates.get(k).copied().unwrap_or(0.0)
    }
}

fn pointwise_lipschitz_probe(n: &Nemytskii, length: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let xi = rng.gen_range(0.0..length);
        let a = rng.gen_range(-10.0..10.0);
        let b = a + rng.gen_range(-1.0..1.0);
        if a != b {
            worst = worst.max(((n.b)(xi, a) - (n.b)(xi, b)).abs() / (a - b).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SpectralConfig {
        SpectralConfig::white_noise(6).unwrap()
    }

    #[test]
    fn zero_and_linear() {
        let cfg = cfg();
        let x = Field::mode(6, 0, 1.0);
        assert_eq!(Nonlinearity::Zero.apply(&x), Field::zeros(6));
        let y = Nonlinearity::linear(0.5).apply(&x);
        assert!((y[0] + 0.5).abs() < 1e-15);
        assert!(y.coeffs()[1..].iter().all(|&c| c == 0.0));
        let _ = cfg;
    }

    #[test]
    fn nemytskii_vanishes_at_origin() {
        let cfg = cfg();
        let b = Nonlinearity::sine(&cfg, 0.5).unwrap();
        assert!(b.apply(&Field::zeros(6)).norm() < 1e-15);
    }

    #[test]
    fn collocation_round_trip_is_exact() {
        let cfg = cfg();
        let grid = Collocation::new(&cfg);
        let coeffs = [0.3, -1.0, 0.25, 2.0, 0.0, -0.7];
        let mut vals = vec![0.0; grid.points().len()];
        grid.synthesize(&coeffs, &mut vals);
        let mut back = [0.0; 6];
        grid.analyze(&vals, &mut back);
        for (a, b) in back.iter().zip(coeffs) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn identity_nemytskii_is_identity() {
        let cfg = cfg();
        let b = Nonlinearity::nemytskii(&cfg, Arc::new(|_, s| 0.25 * s), 0.25).unwrap();
        let x = Field::new(vec![0.1, 0.2, -0.3, 0.0, 0.5, 0.05]).unwrap();
        let y = b.apply(&x);
        for (a, b) in y.coeffs().iter().zip(x.coeffs()) {
            assert!((a - 0.25 * b).abs() < 1e-13);
        }
        let d = b.linearization_diagonal(6);
        assert!(d.iter().all(|&v| (v - 0.25).abs() < 1e-8));
    }

    #[test]
    fn understated_lipschitz_is_rejected() {
        let cfg = cfg();
        let err = Nonlinearity::nemytskii(&cfg, Arc::new(|_, s: f64| 0.9 * s.sin()), 0.5);
        assert!(matches!(err, Err(Error::LipschitzViolation { .. })));
    }

    #[test]
    fn nonzero_at_origin_is_rejected() {
        let cfg = cfg();
        let err = Nonlinearity::nemytskii(
            &cfg,
            Arc::new(|xi: f64, s: f64| 0.1 * s.sin() + xi.sin()),
            0.1,
        );
        assert!(matches!(err, Err(Error::NonzeroAtOrigin(_))));
    }

    #[test]
    fn field_level_lipschitz_respects_declared_bound() {
        let cfg = cfg();
        let b = Nonlinearity::sine(&cfg, 0.5).unwrap();
        let observed = b.verify_lipschitz(&cfg, 500, 7).unwrap();
        assert!(observed <= 0.55);
    }

    #[test]
    fn jacobian_transpose_matches_finite_differences() {
        let cfg = cfg();
        let b = Nonlinearity::Sum(vec![
            Nonlinearity::sine(&cfg, 0.4).unwrap(),
            Nonlinearity::linear_per_mode(vec![0.3, 0.0, 0.1]),
        ]);
        let x = [0.4, -0.2, 0.7, 0.1, -0.3, 0.2];
        let w = [1.0, 0.5, -0.25, 0.3, 0.2, -1.0];
        let mut jt = [0.0; 6];
        b.jacobian_transpose_apply(&x, &w, &mut jt);
        let h = 1e-6;
        for m in 0..6 {
            let mut xp = x;
            let mut xm = x;
            xp[m] += h;
            xm[m] -= h;
            let fp = Field::new(xp.to_vec()).unwrap();
            let fm = Field::new(xm.to_vec()).unwrap();
            let dir = (&b.apply(&fp) - &b.apply(&fm)).scaled(0.5 / h);
            let expected: f64 = dir.coeffs().iter().zip(&w).map(|(a, b)| a * b).sum();
            assert!(
                (jt[m] - expected).abs() < 1e-7,
                "{m}: {} vs {}",
                jt[m],
                expected
            );
        }
    }
}
