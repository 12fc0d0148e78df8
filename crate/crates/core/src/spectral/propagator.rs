use serde::{Deserialize, Serialize};

use super::{Field, Nonlinearity, PhasePoint, SpectralConfig};
use crate::error::{invalid, Result};
use crate::quadrature::CompositeGauss;

/// `|1 - 4μα|` below which a mode is treated as critically damped.
pub const CRITICAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Damping {
    Overdamped,
    Critical,
    Underdamped,
}

/// One mode of the semigroup `S_μ(t)`: the flow of `μq'' + q' + αq = 0`
/// acting on `(q, q')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeStep {
    pub matrix: [[f64; 2]; 2],
    pub damping: Damping,
}

impl ModeStep {
    pub fn apply(&self, u: f64, v: f64) -> (f64, f64) {
        let m = &self.matrix;
        (m[0][0] * u + m[0][1] * v, m[1][0] * u + m[1][1] * v)
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.matrix;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }
}

/// Closed-form `exp(t M)` for `M = [[0, 1], [-α/μ, -1/μ]]`.
///
/// Writing `a = -1/(2μ)` and `δ = (1 - 4μα)/(4μ²)`, we have
/// `(M - aI)² = δI`, hence `exp(tM) = e^{at} (C I + S (M - aI))` with
/// `(C, S) = (cosh √δ t, sinh(√δ t)/√δ)`, its trigonometric continuation
/// for `δ < 0`, and a short Taylor expansion in `δ` at the critical point.
pub fn mode_step(mu: f64, alpha: f64, t: f64) -> ModeStep {
    let disc = 1.0 - 4.0 * mu * alpha;
    let a = -0.5 / mu;
    let delta = disc / (4.0 * mu * mu);
    // M - aI
    let n = [[0.5 / mu, 1.0], [-alpha / mu, -0.5 / mu]];
    let combine = |growth: f64, c: f64, s: f64| {
        [
            [growth * (c + s * n[0][0]), growth * s * n[0][1]],
            [growth * s * n[1][0], growth * (c + s * n[1][1])],
        ]
    };
    if disc.abs() < CRITICAL_TOLERANCE {
        let x = delta * t * t;
        let c = 1.0 + x / 2.0 + x * x / 24.0;
        let s = t * (1.0 + x / 6.0 + x * x / 120.0);
        ModeStep {
            matrix: combine((a * t).exp(), c, s),
            damping: Damping::Critical,
        }
    } else if disc > 0.0 {
        let root = delta.sqrt();
        let matrix = if root * t < 20.0 {
            combine((a * t).exp(), (root * t).cosh(), (root * t).sinh() / root)
        } else {
            // Split into the two real exponentials to avoid overflow.
            let sd = disc.sqrt();
            let slow = -2.0 * alpha / (1.0 + sd);
            let fast = -(1.0 + sd) / (2.0 * mu);
            let (es, ef) = ((slow * t).exp(), (fast * t).exp());
            let gap = slow - fast;
            let m = [[0.0, 1.0], [-alpha / mu, -1.0 / mu]];
            let mut out = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    let id = if i == j { 1.0 } else { 0.0 };
                    out[i][j] = (es * (m[i][j] - fast * id) - ef * (m[i][j] - slow * id)) / gap;
                }
            }
            out
        };
        ModeStep {
            matrix,
            damping: Damping::Overdamped,
        }
    } else {
        let w = (-delta).sqrt();
        ModeStep {
            matrix: combine((a * t).exp(), (w * t).cos(), (w * t).sin() / w),
            damping: Damping::Underdamped,
        }
    }
}

/// Per-mode step matrices of `S_μ(dt)` for a given configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ModePropagator {
    mu: f64,
    dt: f64,
    steps: Vec<ModeStep>,
}

impl ModePropagator {
    pub fn new(cfg: &SpectralConfig, mu: f64, dt: f64) -> Result<Self> {
        check_mass(mu)?;
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(invalid("t", "must be a non-negative real"));
        }
        let steps = cfg
            .eigenvalues()
            .iter()
            .map(|&a| mode_step(mu, a, dt))
            .collect();
        Ok(Self { mu, dt, steps })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> &[ModeStep] {
        &self.steps
    }

    pub fn apply(&self, z: &PhasePoint) -> PhasePoint {
        let mut out = z.clone();
        let PhasePoint { u, v } = &mut out;
        self.apply_in_place(u.coeffs_mut(), v.coeffs_mut());
        out
    }

    pub(crate) fn apply_in_place(&self, u: &mut [f64], v: &mut [f64]) {
        for (k, step) in self.steps.iter().enumerate() {
            let (a, b) = step.apply(u[k], v[k]);
            u[k] = a;
            v[k] = b;
        }
    }
}

pub(crate) fn check_mass(mu: f64) -> Result<()> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(invalid("mu", "the mass must be a positive real"));
    }
    Ok(())
}

/// `S_μ(t) z`, applied mode by mode.
pub fn wave_propagate(cfg: &SpectralConfig, z: &PhasePoint, mu: f64, t: f64) -> Result<PhasePoint> {
    z.u.check_len(cfg.modes())?;
    z.v.check_len(cfg.modes())?;
    Ok(ModePropagator::new(cfg, mu, t)?.apply(z))
}

/// `e^{tA} x`: mode `k` is multiplied by `e^{-α_k t}`.
pub fn heat_propagate(cfg: &SpectralConfig, x: &Field, t: f64) -> Field {
    Field::from_vec_unchecked(
        x.coeffs()
            .iter()
            .zip(cfg.eigenvalues())
            .map(|(c, a)| c * (-a * t).exp())
            .collect(),
    )
}

/// Response over one step of length `h` to forcing entering the velocity
/// equation `μv' = -αu - v + f(t)`, starting from rest.
///
/// `constant` is the response to `f ≡ 1`, `ramp` the response to `f(t) = t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcingResponse {
    pub constant: [f64; 2],
    pub ramp: [f64; 2],
}

impl ForcingResponse {
    pub fn wave(step: &ModeStep, alpha: f64, h: f64) -> Self {
        let m = &step.matrix;
        // Steady state (1/α, 0) relaxes through the semigroup.
        let constant = [(1.0 - m[0][0]) / alpha, -m[1][0] / alpha];
        // Particular solution (t/α - 1/α², 1/α).
        let (p0u, p0v) = (-1.0 / (alpha * alpha), 1.0 / alpha);
        let ramp = [
            h / alpha - 1.0 / (alpha * alpha) - (m[0][0] * p0u + m[0][1] * p0v),
            1.0 / alpha - (m[1][0] * p0u + m[1][1] * p0v),
        ];
        Self { constant, ramp }
    }

    /// First-order analogue for `u' = -αu + f(t)`; only the first slot is used.
    pub fn heat(alpha: f64, h: f64) -> Self {
        let e = (-alpha * h).exp_m1();
        Self {
            constant: [-e / alpha, 0.0],
            ramp: [(h + e / alpha) / alpha, 0.0],
        }
    }
}

/// Exact one-step Gaussian increments of the stochastic convolutions of a
/// mode, jointly for the heat and the wave equation driven by the same
/// Brownian motion `β_k`.
///
/// The covariance (per unit `ε`) of `(X, U, V)` with
/// `X = λ∫e^{-α(h-s)}dβ`, `(U, V) = ∫S_μ(h-s)(0, λ/μ)dβ` is factored as
/// `L Lᵀ` with `X` first, so the heat increment is `L[0][0]·ξ₀` whatever
/// the wave parameters are.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepNoise {
    pub factor: [[f64; 3]; 3],
    pub covariance: [[f64; 3]; 3],
}

impl StepNoise {
    pub fn heat(alpha: f64, lambda: f64, h: f64) -> Self {
        let var = lambda * lambda * -(-2.0 * alpha * h).exp_m1() / (2.0 * alpha);
        let mut covariance = [[0.0; 3]; 3];
        covariance[0][0] = var;
        let mut factor = [[0.0; 3]; 3];
        factor[0][0] = var.sqrt();
        Self { factor, covariance }
    }

    pub fn coupled(mu: f64, alpha: f64, lambda: f64, h: f64) -> Self {
        let mut cov = Self::heat(alpha, lambda, h).covariance;
        if h > 0.0 {
            // Resolve the fastest scale of the integrands.
            let scale = mu.min(1.0 / alpha).min((mu / alpha).sqrt()).min(h);
            let panels = ((h / scale) * 4.0).ceil().clamp(1.0, 20_000.0) as usize;
            let rule = CompositeGauss::new(0.0, h, panels, 12);
            let mut acc = [[0.0; 3]; 3];
            for (r, w) in rule.points() {
                let m = mode_step(mu, alpha, r).matrix;
                let g = [(-alpha * r).exp(), m[0][1] / mu, m[1][1] / mu];
                for i in 0..3 {
                    for j in 0..3 {
                        acc[i][j] += w * g[i] * g[j];
                    }
                }
            }
            let l2 = lambda * lambda;
            for i in 0..3 {
                for j in 0..3 {
                    if i + j > 0 {
                        cov[i][j] = l2 * acc[i][j];
                    }
                }
            }
        }
        Self {
            factor: cholesky3(&cov),
            covariance: cov,
        }
    }

    pub fn heat_increment(&self, xi: &[f64; 3]) -> f64 {
        self.factor[0][0] * xi[0]
    }

    pub fn wave_increment(&self, xi: &[f64; 3]) -> (f64, f64) {
        let l = &self.factor;
        (
            l[1][0] * xi[0] + l[1][1] * xi[1],
            l[2][0] * xi[0] + l[2][1] * xi[1] + l[2][2] * xi[2],
        )
    }
}

/// Lower Cholesky factor of a 3×3 positive semi-definite matrix; pivots
/// lost to rounding are clamped to zero.
fn cholesky3(s: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut l = [[0.0; 3]; 3];
    for j in 0..3 {
        let mut d = s[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        let pivot = if d > 1e-13 * s[j][j].abs() && d > 0.0 {
            d.sqrt()
        } else {
            0.0
        };
        l[j][j] = pivot;
        for i in j + 1..3 {
            let mut x = s[i][j];
            for k in 0..j {
                x -= l[i][k] * l[j][k];
            }
            l[i][j] = if pivot > 0.0 { x / pivot } else { 0.0 };
        }
    }
    l
}

/// Admissibility of a configuration, nonlinearity and mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    /// `β > (d - 2)/4`.
    pub beta_condition: bool,
    pub beta_threshold: f64,
    pub gamma0: f64,
    pub alpha1: f64,
    /// `γ₀ < α₁`.
    pub lipschitz_condition: bool,
    /// `(α₁ - γ₀)/γ₀²`, infinite for `γ₀ = 0`.
    pub small_mass_threshold: f64,
    pub mu: Option<f64>,
    pub mu_below_threshold: Option<bool>,
}

impl HypothesisReport {
    pub fn all_hold(&self) -> bool {
        self.beta_condition && self.lipschitz_condition && self.mu_below_threshold.unwrap_or(true)
    }
}

pub fn check_hypotheses(
    cfg: &SpectralConfig,
    b: &Nonlinearity,
    mu: Option<f64>,
) -> HypothesisReport {
    let gamma0 = b.lipschitz_bound();
    let alpha1 = cfg.alpha1();
    let small_mass_threshold = if gamma0 == 0.0 {
        f64::INFINITY
    } else {
        (alpha1 - gamma0) / (gamma0 * gamma0)
    };
    HypothesisReport {
        beta_condition: cfg.is_admissible(),
        beta_threshold: (cfg.space_dim() as f64 - 2.0) / 4.0,
        gamma0,
        alpha1,
        lipschitz_condition: gamma0 < alpha1,
        small_mass_threshold,
        mu,
        mu_below_threshold: mu.map(|m| m < small_mass_threshold),
    }
}

/// Empirical constants of `‖S_μ(t)‖_{L(ℋ)} ≤ M e^{-ωt}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub omega: f64,
    pub prefactor: f64,
}

/// Fits `log ‖S_μ(t)‖` per mode on a late time window and reports the
/// slowest rate together with the smallest prefactor valid on the samples.
pub fn decay_fit(cfg: &SpectralConfig, mu: f64) -> Result<DecayFit> {
    check_mass(mu)?;
    let mut omega = f64::INFINITY;
    let mut windows = Vec::new();
    for &alpha in cfg.eigenvalues() {
        let disc = 1.0 - 4.0 * mu * alpha;
        let guess = if disc > 0.0 {
            2.0 * alpha / (1.0 + disc.sqrt())
        } else {
            0.5 / mu
        };
        let (t0, t1) = (10.0 / guess, 30.0 / guess);
        let n = 200;
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..=n {
            let t = t0 + (t1 - t0) * i as f64 / n as f64;
            let y = energy_operator_norm(mu, alpha, t).ln();
            sx += t;
            sy += y;
            sxx += t * t;
            sxy += t * y;
        }
        let m = (n + 1) as f64;
        let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        omega = omega.min(-slope);
        windows.push((alpha, t1));
    }
    let mut prefactor = 1.0f64;
    for (alpha, t1) in windows {
        for i in 0..=400 {
            let t = t1 * i as f64 / 400.0;
            prefactor = prefactor.max(energy_operator_norm(mu, alpha, t) * (omega * t).exp());
        }
    }
    Ok(DecayFit { omega, prefactor })
}

/// Norm of one mode of `S_μ(t)` in the energy norm `u² + v²/α`.
pub fn energy_operator_norm(mu: f64, alpha: f64, t: f64) -> f64 {
    let m = mode_step(mu, alpha, t).matrix;
    let s = alpha.sqrt();
    let a = [[m[0][0], m[0][1] * s], [m[1][0] / s, m[1][1]]];
    spectral_norm2(&a)
}

fn spectral_norm2(a: &[[f64; 2]; 2]) -> f64 {
    let fro = a[0][0].powi(2) + a[0][1].powi(2) + a[1][0].powi(2) + a[1][1].powi(2);
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let disc = (fro * fro - 4.0 * det * det).max(0.0);
    (0.5 * (fro + disc.sqrt())).sqrt()
}
