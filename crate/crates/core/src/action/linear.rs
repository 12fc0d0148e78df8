use crate::error::{Error, Result};
use crate::spectral::{check_mass, mode_step, PhasePoint, SpectralConfig};

/// Minimum energy `½|L^{-1}z|²` to reach `z = (u, v)` from rest at `-∞`
/// for the linear wave system: `Σ_k (α_k u_k² + μ v_k²) / λ_k²`.
pub fn linear_min_energy_infinite(cfg: &SpectralConfig, z: &PhasePoint, mu: f64) -> Result<f64> {
    check_mass(mu)?;
    z.u.check_len(cfg.modes())?;
    z.v.check_len(cfg.modes())?;
    Ok(cfg
        .eigenvalues()
        .iter()
        .zip(cfg.noise())
        .enumerate()
        .map(|(k, (a, l))| (a * z.u[k] * z.u[k] + mu * z.v[k] * z.v[k]) / (l * l))
        .sum())
}

/// Stationary covariance `diag(λ²/2α, λ²/2μ)` of one wave mode.
fn stationary(alpha: f64, lambda: f64, mu: f64) -> [f64; 2] {
    [
        lambda * lambda / (2.0 * alpha),
        lambda * lambda / (2.0 * mu),
    ]
}

/// Minimum energy to reach `z` from rest in time `T`: per mode
/// `½ zᵀ W_T^{-1} z` with the controllability Gramian
/// `W_T = W_∞ - S(T) W_∞ S(T)ᵀ`.
pub fn linear_min_energy_finite(
    cfg: &SpectralConfig,
    z: &PhasePoint,
    mu: f64,
    horizon: f64,
) -> Result<f64> {
    check_mass(mu)?;
    z.u.check_len(cfg.modes())?;
    z.v.check_len(cfg.modes())?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(crate::error::invalid(
            "T",
            "the horizon must be a positive real",
        ));
    }
    let mut total = 0.0;
    for (k, (&alpha, &lambda)) in cfg.eigenvalues().iter().zip(cfg.noise()).enumerate() {
        let w = stationary(alpha, lambda, mu);
        let e = mode_step(mu, alpha, horizon).matrix;
        // Gramian in the coordinates scaled by W_∞^{1/2}: I - F Fᵀ with
        // F = W_∞^{-1/2} E W_∞^{1/2}; this keeps the conditioning check
        // independent of λ.
        let s = [w[0].sqrt(), w[1].sqrt()];
        let f = [
            [e[0][0], e[0][1] * s[1] / s[0]],
            [e[1][0] * s[0] / s[1], e[1][1]],
        ];
        let g = [
            [
                1.0 - (f[0][0] * f[0][0] + f[0][1] * f[0][1]),
                -(f[0][0] * f[1][0] + f[0][1] * f[1][1]),
            ],
            [0.0, 1.0 - (f[1][0] * f[1][0] + f[1][1] * f[1][1])],
        ];
        let (g00, g01, g11) = (g[0][0], g[0][1], g[1][1]);
        let tr = g00 + g11;
        let det = g00 * g11 - g01 * g01;
        let min_eig = 0.5 * (tr - ((g00 - g11).powi(2) + 4.0 * g01 * g01).sqrt());
        if horizon * min_eig < 1e-12 || det <= 0.0 {
            return Err(Error::IllConditioned(format!(
                "controllability Gramian of mode {} is nearly singular at T = {horizon}",
                k + 1
            )));
        }
        let (a, b) = (z.u[k] / s[0], z.v[k] / s[1]);
        total += 0.5 * (g11 * a * a - 2.0 * g01 * a * b + g00 * b * b) / det;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Field;

    #[test]
    fn infinite_horizon_examples() {
        let cfg = SpectralConfig::white_noise(4).unwrap();
        let e1 = Field::mode(4, 0, 1.0);
        let z = PhasePoint::new(e1.clone(), Field::zeros(4)).unwrap();
        assert!((linear_min_energy_infinite(&cfg, &z, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let z = PhasePoint::new(Field::zeros(4), e1).unwrap();
        assert!((linear_min_energy_infinite(&cfg, &z, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(
            linear_min_energy_infinite(&cfg, &PhasePoint::zeros(4), 0.5).unwrap(),
            0.0
        );
    }

    #[test]
    fn finite_horizon_decreases_to_the_limit() {
        let cfg = SpectralConfig::white_noise(4).unwrap();
        let z = PhasePoint::new(Field::mode(4, 0, 1.0), Field::zeros(4)).unwrap();
        let v1 = linear_min_energy_finite(&cfg, &z, 1.0, 1.0).unwrap();
        let v10 = linear_min_energy_finite(&cfg, &z, 1.0, 10.0).unwrap();
        let v20 = linear_min_energy_finite(&cfg, &z, 1.0, 20.0).unwrap();
        let inf = linear_min_energy_infinite(&cfg, &z, 1.0).unwrap();
        assert!(v1 >= v10 && v10 >= inf);
        assert!((v20 - inf).abs() < 1e-6, "{v20} {inf}");
        assert_eq!(
            linear_min_energy_finite(&cfg, &PhasePoint::zeros(4), 1.0, 3.0).unwrap(),
            0.0
        );
    }

    #[test]
    fn tiny_horizon_is_flagged() {
        let cfg = SpectralConfig::white_noise(1).unwrap();
        let z = PhasePoint::new(Field::mode(1, 0, 1.0), Field::zeros(1)).unwrap();
        assert!(matches!(
            linear_min_energy_finite(&cfg, &z, 1.0, 1e-5),
            Err(Error::IllConditioned(_))
        ));
    }
}
