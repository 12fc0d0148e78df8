use super::grid::{Control, Path};
use super::integrator::guard;
use crate::error::Result;
use crate::spectral::{
    check_mass, mode_step, Field, ForcingResponse, ModeStep, Nonlinearity, PhasePoint,
    SpectralConfig,
};

/// Controlled wave equation `μ φ'' + φ' = Aφ + B(φ) + Qψ` on the grid of
/// `psi`, started at `z0`.
///
/// Second-order exponential time differencing: the forcing
/// `f = B(φ) + Qψ` is interpolated linearly over each step, with a
/// predictor for `B` at the right node, and integrated exactly against the
/// semigroup. `ψ` is taken to be linear between nodes.
pub fn skeleton_solve_wave(
    cfg: &SpectralConfig,
    z0: &PhasePoint,
    mu: f64,
    b: &Nonlinearity,
    psi: &Control,
) -> Result<Path> {
    check_mass(mu)?;
    let k = cfg.modes();
    z0.u.check_len(k)?;
    z0.v.check_len(k)?;
    psi.values()[0].check_len(k)?;
    let grid = *psi.grid();
    let h = grid.dt();
    let steps: Vec<ModeStep> = cfg
        .eigenvalues()
        .iter()
        .map(|&a| mode_step(mu, a, h))
        .collect();
    let forcing: Vec<ForcingResponse> = steps
        .iter()
        .zip(cfg.eigenvalues())
        .map(|(s, &a)| ForcingResponse::wave(s, a, h))
        .collect();
    let lam = cfg.noise();

    let mut u = z0.u.coeffs().to_vec();
    let mut v = z0.v.coeffs().to_vec();
    let mut f0 = vec![0.0; k];
    let mut f1 = vec![0.0; k];
    let mut pu = vec![0.0; k];
    let mut us = vec![z0.u.clone()];
    let mut vs = vec![z0.v.clone()];
    for n in 0..grid.n_steps() {
        let (p0, p1) = (&psi.values()[n], &psi.values()[n + 1]);
        b.apply_into(&u, &mut f0);
        for i in 0..k {
            f0[i] += lam[i] * p0[i];
        }
        let mut base = vec![(0.0, 0.0); k];
        for i in 0..k {
            let (eu, ev) = steps[i].apply(u[i], v[i]);
            base[i] = (eu, ev);
            pu[i] = eu + forcing[i].constant[0] * f0[i];
        }
        b.apply_into(&pu, &mut f1);
        for i in 0..k {
            f1[i] += lam[i] * p1[i];
            let slope = (f1[i] - f0[i]) / h;
            let c = &forcing[i];
            u[i] = base[i].0 + c.constant[0] * f0[i] + c.ramp[0] * slope;
            v[i] = base[i].1 + c.constant[1] * f0[i] + c.ramp[1] * slope;
        }
        guard(&u, grid.time(n + 1))?;
        us.push(Field::from_vec_unchecked(u.clone()));
        vs.push(Field::from_vec_unchecked(v.clone()));
    }
    Ok(Path::from_parts_unchecked(grid, us, Some(vs)))
}

/// Controlled heat equation `φ' = Aφ + B(φ) + Qψ`, with the same scheme as
/// [`skeleton_solve_wave`].
pub fn skeleton_solve_heat(
    cfg: &SpectralConfig,
    u0: &Field,
    b: &Nonlinearity,
    psi: &Control,
) -> Result<Path> {
    let k = cfg.modes();
    u0.check_len(k)?;
    psi.values()[0].check_len(k)?;
    let grid = *psi.grid();
    let h = grid.dt();
    let alpha = cfg.eigenvalues();
    let decay: Vec<f64> = alpha.iter().map(|a| (-a * h).exp()).collect();
    let forcing: Vec<ForcingResponse> =
        alpha.iter().map(|&a| ForcingResponse::heat(a, h)).collect();
    let lam = cfg.noise();

    let mut u = u0.coeffs().to_vec();
    let mut f0 = vec![0.0; k];
    let mut f1 = vec![0.0; k];
    let mut pu = vec![0.0; k];
    let mut us = vec![u0.clone()];
    for n in 0..grid.n_steps() {
        let (p0, p1) = (&psi.values()[n], &psi.values()[n + 1]);
        b.apply_into(&u, &mut f0);
        for i in 0..k {
            f0[i] += lam[i] * p0[i];
            pu[i] = decay[i] * u[i] + forcing[i].constant[0] * f0[i];
        }
        b.apply_into(&pu, &mut f1);
        for i in 0..k {
            f1[i] += lam[i] * p1[i];
            let slope = (f1[i] - f0[i]) / h;
            u[i] = pu[i] + forcing[i].ramp[0] * slope;
        }
        guard(&u, grid.time(n + 1))?;
        us.push(Field::from_vec_unchecked(u.clone()));
    }
    Ok(Path::from_parts_unchecked(grid, us, None))
}
