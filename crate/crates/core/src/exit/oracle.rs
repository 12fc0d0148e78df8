use crate::error::{invalid, Result};
use crate::quadrature::CompositeGauss;

/// Mean exit time from `(-r, r)` of `dX = -κ X dt + σ dW` started at 0.
///
/// Solves `(σ²/2) T'' - κ x T' = -1`, `T(±r) = 0`, by the double integral
/// `T(0) = (2/σ²) ∫₀^r e^{κy²/σ²} ∫₀^y e^{-κz²/σ²} dz dy`.
pub fn ou_mean_exit_time(kappa: f64, sigma2: f64, radius: f64) -> Result<f64> {
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(invalid("kappa", "must be a non-negative real"));
    }
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(invalid("sigma2", "must be a positive real"));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(invalid("radius", "must be a positive real"));
    }
    let a = kappa / sigma2;
    let outer = CompositeGauss::new(0.0, radius, 64, 16);
    Ok(2.0 / sigma2
        * outer.integrate(|y| {
            CompositeGauss::new(0.0, y, 8, 16).integrate(|z| (a * (y * y - z * z)).exp())
        }))
}

/// Mean exit time of one heat mode, `du = -(α + κ) u dt + √ε λ dw`.
pub fn heat_mode_mean_exit_time(
    alpha: f64,
    kappa: f64,
    lambda: f64,
    eps: f64,
    radius: f64,
) -> Result<f64> {
    ou_mean_exit_time(alpha + kappa, eps * lambda * lambda, radius)
}
