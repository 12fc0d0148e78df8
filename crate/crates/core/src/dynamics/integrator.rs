use serde::{Deserialize, Serialize};

use super::grid::{Path, TimeGrid};
use crate::error::{invalid, Error, Result};
use crate::noise::NoisePlan;
use crate::spectral::{
    check_mass, mode_step, Field, ForcingResponse, ModeStep, Nonlinearity, PhasePoint,
    SpectralConfig, StepNoise,
};

/// Simulations abort once `|u|_H` exceeds this value.
pub const DIVERGENCE_BOUND: f64 = 1e6;

/// Which of the two systems is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Equation {
    /// `du = (Au + B(u)) dt + √ε Q dw`.
    Heat,
    /// `μ u'' + u' = Au + B(u) + √ε Q ẇ`.
    Wave { mu: f64 },
}

impl Equation {
    pub fn mass(&self) -> Option<f64> {
        match *self {
            Equation::Heat => None,
            Equation::Wave { mu } => Some(mu),
        }
    }
}

#[derive(Debug, Clone)]
struct ModeData {
    decay: f64,
    heat_forcing: ForcingResponse,
    step: Option<ModeStep>,
    wave_forcing: Option<ForcingResponse>,
    noise: StepNoise,
}

/// Exponential integrator for one system at a fixed step.
///
/// The linear flow is exact per mode, `B` is frozen at the left node and
/// integrated exactly against the semigroup, and the stochastic
/// convolution is sampled from its exact one-step Gaussian law. Each step
/// consumes one triple of standard normals per mode; the heat equation
/// reads the first entry and the wave equation the joint law of all three,
/// so both systems fed the same triples are driven by the same Brownian
/// motion.
#[derive(Debug, Clone)]
pub struct Integrator {
    equation: Equation,
    dt: f64,
    sqrt_eps: f64,
    modes: Vec<ModeData>,
}

impl Integrator {
    pub fn new(cfg: &SpectralConfig, equation: Equation, dt: f64, eps: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", "must be a positive real"));
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(invalid("eps", "must be a non-negative real"));
        }
        if let Some(mu) = equation.mass() {
            check_mass(mu)?;
        }
        let modes = cfg
            .eigenvalues()
            .iter()
            .zip(cfg.noise())
            .map(|(&alpha, &lambda)| {
                let (step, wave_forcing, noise) = match equation {
                    Equation::Heat => (None, None, StepNoise::heat(alpha, lambda, dt)),
                    Equation::Wave { mu } => {
                        let step = mode_step(mu, alpha, dt);
                        let forcing = ForcingResponse::wave(&step, alpha, dt);
                        let noise = if eps > 0.0 {
                            StepNoise::coupled(mu, alpha, lambda, dt)
                        } else {
                            StepNoise::heat(alpha, lambda, dt)
                        };
                        (Some(step), Some(forcing), noise)
                    }
                };
                ModeData {
                    decay: (-alpha * dt).exp(),
                    heat_forcing: ForcingResponse::heat(alpha, dt),
                    step,
                    wave_forcing,
                    noise,
                }
            })
            .collect();
        Ok(Self {
            equation,
            dt,
            sqrt_eps: eps.sqrt(),
            modes,
        })
    }

    pub fn equation(&self) -> Equation {
        self.equation
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn modes(&self) -> usize {
        self.modes.len()
    }

    /// Advances `(u, v)` by one step. `v` is ignored for the heat equation;
    /// `noise` may be omitted when `ε = 0`. `scratch` holds `B(u)`.
    pub fn step(
        &self,
        b: &Nonlinearity,
        u: &mut [f64],
        v: &mut [f64],
        noise: Option<&[[f64; 3]]>,
        scratch: &mut [f64],
    ) {
        b.apply_into(u, scratch);
        let noisy = self.sqrt_eps > 0.0;
        for (k, m) in self.modes.iter().enumerate() {
            let f = scratch[k];
            match (m.step, m.wave_forcing) {
                (Some(step), Some(forcing)) => {
                    let (mut nu, mut nv) = step.apply(u[k], v[k]);
                    nu += forcing.constant[0] * f;
                    nv += forcing.constant[1] * f;
                    if let (true, Some(xi)) = (noisy, noise) {
                        let (du, dv) = m.noise.wave_increment(&xi[k]);
                        nu += self.sqrt_eps * du;
                        nv += self.sqrt_eps * dv;
                    }
                    u[k] = nu;
                    v[k] = nv;
                }
                _ => {
                    let mut nu = m.decay * u[k] + m.heat_forcing.constant[0] * f;
                    if let (true, Some(xi)) = (noisy, noise) {
                        nu += self.sqrt_eps * m.noise.heat_increment(&xi[k]);
                    }
                    u[k] = nu;
                }
            }
        }
    }
}

/// Errors out once the state leaves the divergence bound.
pub(crate) fn guard(u: &[f64], time: f64) -> Result<()> {
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm <= DIVERGENCE_BOUND) {
        return Err(Error::Diverged { time, norm });
    }
    Ok(())
}

fn simulate(
    cfg: &SpectralConfig,
    equation: Equation,
    z0: &PhasePoint,
    eps: f64,
    b: &Nonlinearity,
    grid: &TimeGrid,
    plan: &NoisePlan,
) -> Result<Path> {
    let k = cfg.modes();
    z0.u.check_len(k)?;
    z0.v.check_len(k)?;
    let integrator = Integrator::new(cfg, equation, grid.dt(), eps)?;
    let mut cursor = plan.cursor(k, 0);
    let mut triples = vec![[0.0; 3]; k];
    let mut scratch = vec![0.0; k];
    let mut u = z0.u.coeffs().to_vec();
    let mut v = z0.v.coeffs().to_vec();
    let wave = equation.mass().is_some();
    let mut us = Vec::with_capacity(grid.nodes());
    let mut vs = Vec::with_capacity(if wave { grid.nodes() } else { 0 });
    us.push(z0.u.clone());
    if wave {
        vs.push(z0.v.clone());
    }
    for n in 0..grid.n_steps() {
        let noise = if eps > 0.0 {
            cursor.next_step(&mut triples);
            Some(triples.as_slice())
        } else {
            None
        };
        integrator.step(b, &mut u, &mut v, noise, &mut scratch);
        guard(&u, grid.time(n + 1))?;
        us.push(Field::from_vec_unchecked(u.clone()));
        if wave {
            vs.push(Field::from_vec_unchecked(v.clone()));
        }
    }
    Ok(Path::from_parts_unchecked(*grid, us, wave.then_some(vs)))
}

/// Sample path of the stochastic heat equation started at `u0`.
pub fn simulate_heat(
    cfg: &SpectralConfig,
    u0: &Field,
    eps: f64,
    b: &Nonlinearity,
    grid: &TimeGrid,
    plan: &NoisePlan,
) -> Result<Path> {
    let z0 = PhasePoint {
        u: u0.clone(),
        v: Field::zeros(u0.len()),
    };
    simulate(cfg, Equation::Heat, &z0, eps, b, grid, plan)
}

/// Sample path of the damped stochastic wave equation started at `z0`.
pub fn simulate_wave(
    cfg: &SpectralConfig,
    z0: &PhasePoint,
    mu: f64,
    eps: f64,
    b: &Nonlinearity,
    grid: &TimeGrid,
    plan: &NoisePlan,
) -> Result<Path> {
    simulate(cfg, Equation::Wave { mu }, z0, eps, b, grid, plan)
}

/// The noiseless wave flow `z(t) = S_μ(t) z0 + ∫ S_μ(t-s)(0, B(u(s))/μ) ds`.
pub fn unperturbed_flow(
    cfg: &SpectralConfig,
    z0: &PhasePoint,
    mu: f64,
    b: &Nonlinearity,
    grid: &TimeGrid,
) -> Result<Path> {
    simulate_wave(cfg, z0, mu, 0.0, b, grid, &NoisePlan::new(0, 0))
}
