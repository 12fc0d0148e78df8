use serde::{Deserialize, Serialize};

use super::stencil::{node, quadratic_action, residual, v_end, v_start, Ends, Stencil};
use crate::dynamics::{Control, Equation, Path};
use crate::error::{invalid, Error, Result};
use crate::spectral::{check_mass, Field, Nonlinearity, SpectralConfig};

/// Value of a discrete action together with the decomposition
/// `I^μ = I + J^μ` when it was requested.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionReport {
    pub value: f64,
    /// The first-order action `I` of the same path.
    pub heat_part: f64,
    /// `J^μ = (μ²/2)∫|Q^{-1}φ''|² + μ∫⟨Q^{-1}φ'', Q^{-1}(φ' - Aφ - B(φ))⟩`.
    pub remainder: f64,
    /// `|value - heat_part - remainder|`.
    pub residual_norm: f64,
}

/// Flattens a path into the stencil layout `[v_0, φ_0, …, φ_n, v_n]`.
pub(crate) fn extended_unknowns(path: &Path) -> Vec<f64> {
    let n = path.grid().n_steps();
    let k = path.modes();
    let mut x = vec![0.0; (n + 3) * k];
    for (i, u) in path.positions().iter().enumerate() {
        x[node(i) * k..(node(i) + 1) * k].copy_from_slice(u.coeffs());
    }
    if let Some(v) = path.velocities() {
        x[v_start() * k..(v_start() + 1) * k].copy_from_slice(v[0].coeffs());
        x[v_end(n) * k..(v_end(n) + 1) * k].copy_from_slice(v[n].coeffs());
    }
    x
}

fn check_path(cfg: &SpectralConfig, path: &Path, min_nodes: usize) -> Result<()> {
    if path.grid().nodes() < min_nodes {
        return Err(invalid(
            "path",
            format!("at least {min_nodes} nodes are needed"),
        ));
    }
    path.position(0).check_len(cfg.modes())
}

fn inverse_noise(cfg: &SpectralConfig) -> Result<Vec<f64>> {
    cfg.noise()
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let inv = 1.0 / l;
            if inv.is_finite() {
                Ok(inv)
            } else {
                Err(Error::IllConditioned(format!(
                    "λ_{} = {l:e} cannot be inverted",
                    k + 1
                )))
            }
        })
        .collect()
}

fn wave_stencil(path: &Path) -> Stencil {
    let ends = if path.is_wave() {
        Ends::Ghost
    } else {
        Ends::OneSided
    };
    Stencil::new(path.grid().n_steps(), path.grid().dt(), ends, true)
}

/// The control `ψ = Q^{-1}(μφ'' + φ' - Aφ - B(φ))` (heat: without `μφ''`)
/// realising `phi` through the skeleton equation, at every grid node.
pub fn control_from_path(
    cfg: &SpectralConfig,
    phi: &Path,
    equation: Equation,
    b: &Nonlinearity,
) -> Result<Control> {
    let inv = inverse_noise(cfg)?;
    let (stencil, mu) = match equation {
        Equation::Heat => {
            check_path(cfg, phi, 3)?;
            (
                Stencil::new(phi.grid().n_steps(), phi.grid().dt(), Ends::OneSided, false),
                None,
            )
        }
        Equation::Wave { mu } => {
            check_mass(mu)?;
            check_path(cfg, phi, if phi.is_wave() { 3 } else { 4 })?;
            (wave_stencil(phi), Some(mu))
        }
    };
    let k = cfg.modes();
    let r = residual(&stencil, mu, cfg, b, &extended_unknowns(phi));
    let values = r
        .chunks(k)
        .map(|ri| Field::new(ri.iter().zip(&inv).map(|(x, l)| x * l).collect()))
        .collect::<Result<Vec<_>>>()?;
    Control::new(*phi.grid(), values)
}

/// `I(φ) = ½∫|Q^{-1}(φ' - Aφ - B(φ))|²` by the trapezoidal rule.
pub fn action_heat(cfg: &SpectralConfig, phi: &Path, b: &Nonlinearity) -> Result<ActionReport> {
    check_path(cfg, phi, 3)?;
    inverse_noise(cfg)?;
    let stencil = Stencil::new(phi.grid().n_steps(), phi.grid().dt(), Ends::OneSided, false);
    let r = residual(&stencil, None, cfg, b, &extended_unknowns(phi));
    let value = quadratic_action(&stencil, cfg, &r);
    Ok(ActionReport {
        value,
        heat_part: value,
        remainder: 0.0,
        residual_norm: 0.0,
    })
}

/// `I^μ(z) = ½∫|Q^{-1}(μφ'' + φ' - Aφ - B(φ))|²` together with the split
/// into the first-order action and `J^μ`.
///
/// A path carrying velocities uses them as `φ'` at the two ends; `J^μ`
/// pairs the interior stencils of both functionals, so the split is exact
/// at interior nodes and its residual comes from the ends only.
pub fn action_wave(
    cfg: &SpectralConfig,
    z: &Path,
    mu: f64,
    b: &Nonlinearity,
) -> Result<ActionReport> {
    check_mass(mu)?;
    check_path(cfg, z, if z.is_wave() { 3 } else { 4 })?;
    inverse_noise(cfg)?;
    let k = cfg.modes();
    let x = extended_unknowns(z);
    let stencil = wave_stencil(z);
    let value = quadratic_action(&stencil, cfg, &residual(&stencil, Some(mu), cfg, b, &x));

    let heat_stencil = Stencil::new(z.grid().n_steps(), z.grid().dt(), Ends::OneSided, false);
    let heat_r = residual(&heat_stencil, None, cfg, b, &x);
    let heat_part = quadratic_action(&heat_stencil, cfg, &heat_r);

    let d2 = Stencil::apply(&stencil.d2, &x, k);
    let lam = cfg.noise();
    let mut remainder = 0.0;
    for (i, w) in stencil.weights.iter().enumerate() {
        let mut s = 0.0;
        for m in 0..k {
            let a = d2[i * k + m] / lam[m];
            let c = heat_r[i * k + m] / lam[m];
            s += 0.5 * mu * mu * a * a + mu * a * c;
        }
        remainder += w * s;
    }
    Ok(ActionReport {
        value,
        heat_part,
        remainder,
        residual_norm: (value - heat_part - remainder).abs(),
    })
}
