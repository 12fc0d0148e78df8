use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mam::{mam_minimize, EndpointVelocity, MamOptions, MamProblem, MamResult};
use crate::action::{action_heat, control_from_path};
use crate::dynamics::{skeleton_solve_wave, Equation};
use crate::error::{invalid, Error, Result};
use crate::spectral::{check_mass, CertifiedPotential, Field, Nonlinearity, SpectralConfig};

/// `V_μ(x) = inf_y V^μ(x, y)`: minimum action with free terminal velocity.
pub fn v_mu(
    cfg: &SpectralConfig,
    x: &Field,
    mu: f64,
    b: &Nonlinearity,
    options: MamOptions,
) -> Result<MamResult> {
    mam_minimize(
        &MamProblem::wave(cfg, b, mu, x.clone(), EndpointVelocity::Free).with_options(options),
    )
}

/// `V(x)`, the quasi-potential of the heat equation.
pub fn v_heat(
    cfg: &SpectralConfig,
    x: &Field,
    b: &Nonlinearity,
    options: MamOptions,
) -> Result<MamResult> {
    mam_minimize(&MamProblem::heat(cfg, b, x.clone()).with_options(options))
}

/// Closed form in the gradient case `B = -Q²DF`:
/// `V^μ(x, y) = |(-A)^{1/2} Q^{-1} x|² + 2F(x) + μ|Q^{-1} y|²`, with
/// `y = 0` when omitted.
pub fn v_exact_gradient(
    cfg: &SpectralConfig,
    x: &Field,
    y: Option<&Field>,
    mu: f64,
    potential: &CertifiedPotential,
) -> Result<f64> {
    check_mass(mu)?;
    x.check_len(cfg.modes())?;
    let lam = cfg.noise();
    let position: f64 = (0..cfg.modes())
        .map(|k| cfg.eigenvalues()[k] * x[k] * x[k] / (lam[k] * lam[k]))
        .sum();
    let velocity = match y {
        Some(y) => {
            y.check_len(cfg.modes())?;
            mu * (0..cfg.modes())
                .map(|k| y[k] * y[k] / (lam[k] * lam[k]))
                .sum::<f64>()
        }
        None => 0.0,
    };
    Ok(position + 2.0 * potential.value(x) + velocity)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkLimitRow {
    pub mu: f64,
    pub v_mu: f64,
    /// `|V_μ(x) - V(x)|`.
    pub gap: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkLimitTable {
    pub rows: Vec<SkLimitRow>,
    pub v: f64,
    pub v_converged: bool,
    /// `action_heat` evaluated on the heat minimiser, as a cross-check of
    /// `v` with the node-centred quadrature.
    pub v_action_check: f64,
}

impl SkLimitTable {
    pub fn all_converged(&self) -> bool {
        self.v_converged && self.rows.iter().all(|r| r.converged)
    }

    /// Gaps strictly decrease along the ladder.
    pub fn gaps_decrease(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].gap < w[0].gap)
    }
}

/// `V_μ(x)` along a mass ladder next to `V(x)`; the ladder entries are
/// solved in parallel.
pub fn sk_limit_study(
    cfg: &SpectralConfig,
    x: &Field,
    mu_ladder: &[f64],
    b: &Nonlinearity,
    options: MamOptions,
) -> Result<SkLimitTable> {
    let tail = x.sobolev_norm(cfg, 1.0 + 2.0 * cfg.beta());
    if !tail.is_finite() {
        return Err(invalid("x", "the target must have a finite H^{1+2β} norm"));
    }
    let heat = v_heat(cfg, x, b, options)?;
    let check = action_heat(cfg, &heat.path, b)?.value;
    let rows = mu_ladder
        .par_iter()
        .map(|&mu| {
            let r = v_mu(cfg, x, mu, b, options)?;
            Ok(SkLimitRow {
                mu,
                v_mu: r.action,
                gap: (r.action - heat.action).abs(),
                converged: r.converged,
                iterations: r.iterations,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SkLimitTable {
        rows,
        v: heat.action,
        v_converged: heat.converged,
        v_action_check: check,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizedRow {
    pub delta: f64,
    /// `|x^μ - x^{μ,δ}|_{H^{2β}}` between the endpoints reached by the
    /// original and the regularised control.
    pub drift: f64,
    /// `drift / √δ`; `None` for `δ = 0`.
    pub drift_over_sqrt_delta: Option<f64>,
    /// `½∫|ψ^{μ,δ}|²`.
    pub control_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizedTable {
    pub mu: f64,
    /// `½∫|ψ^μ|²` of the unregularised control.
    pub control_energy: f64,
    /// `|x^μ - x|_H`: how well the skeleton reproduces the target.
    pub round_trip_error: f64,
    pub rows: Vec<RegularizedRow>,
}

/// Replaces the optimal control `ψ^μ` of a minimum-action path by
/// `(I - δA)^{-1/2} ψ^μ` (mode `k` scaled by `(1 + δα_k)^{-1/2}`), solves
/// the skeleton again and reports how far the endpoint moves.
pub fn regularized_control_experiment(
    cfg: &SpectralConfig,
    base: &MamResult,
    mu: f64,
    b: &Nonlinearity,
    delta_ladder: &[f64],
) -> Result<RegularizedTable> {
    if !base.path.is_wave() {
        return Err(invalid("base", "a wave minimum-action path is required"));
    }
    if delta_ladder.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
        return Err(invalid(
            "delta_ladder",
            "entries must be non-negative reals",
        ));
    }
    let psi = control_from_path(cfg, &base.path, Equation::Wave { mu }, b)?;
    let start = base.path.state(0);
    let endpoint = |c: &crate::dynamics::Control| -> Result<Field> {
        let p = skeleton_solve_wave(cfg, &start, mu, b, c)?;
        Ok(p.last().u)
    };
    let reference = endpoint(&psi)?;
    let target = base.path.last().u;
    let delta_norm = 2.0 * cfg.beta();
    let rows = delta_ladder
        .iter()
        .map(|&delta| {
            let mult: Vec<f64> = cfg
                .eigenvalues()
                .iter()
                .map(|a| (1.0 + delta * a).powf(-0.5))
                .collect();
            let reg = psi.map_modes(&mult);
            let end = endpoint(&reg)?;
            let drift = (&end - &reference).sobolev_norm(cfg, delta_norm);
            if !drift.is_finite() {
                return Err(Error::NonFinite("regularised endpoint"));
            }
            Ok(RegularizedRow {
                delta,
                drift,
                drift_over_sqrt_delta: (delta > 0.0).then(|| drift / delta.sqrt()),
                control_energy: reg.energy(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegularizedTable {
        mu,
        control_energy: psi.energy(),
        round_trip_error: (&reference - &target).norm(),
        rows,
    })
}
