//! Quick invariant suite run by `skld verify` and the `verify` experiment.

use serde::{Deserialize, Serialize};
use skld::action::{
    action_wave, control_from_path, linear_min_energy_finite, linear_min_energy_infinite,
    MollifierSpec,
};
use skld::dynamics::{
    simulate_heat, skeleton_solve_heat, unperturbed_flow, Equation, Path, TimeGrid,
};
use skld::quasipotential::{v_heat, MamOptions};
use skld::spectral::{check_hypotheses, decay_fit, mode_step, wave_propagate};
use skld::{Field, NoisePlan, Nonlinearity, PhasePoint, SpectralConfig};

use crate::error::CliError;
use crate::output::Artifacts;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// The measured quantity; the check passes when it is at most
    /// `tolerance`.
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_owned(),
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

pub fn checks(cfg: &SpectralConfig, b: &Nonlinearity, seed: u64) -> Result<Vec<Check>, CliError> {
    let k = cfg.modes();
    let e1 = Field::mode(k, 0, 1.0);
    let mut out = Vec::new();

    let h = check_hypotheses(cfg, b, None);
    out.push(Check::new(
        "hypotheses_hold",
        if h.all_hold() { 0.0 } else { 1.0 },
        0.0,
    ));

    // Propagator: det S_μ(t) = e^{-t/μ} per mode and the semigroup law.
    let (mu, s, t) = (0.1, 0.3, 0.45);
    let det = cfg
        .eigenvalues()
        .iter()
        .map(|&a| {
            let m = mode_step(mu, a, t).matrix;
            let scale = (m[0][0] * m[1][1]).abs() + (m[0][1] * m[1][0]).abs() + (-t / mu).exp();
            (m[0][0] * m[1][1] - m[0][1] * m[1][0] - (-t / mu).exp()).abs() / scale
        })
        .fold(0.0, f64::max);
    out.push(Check::new("propagator_determinant", det, 1e-12));
    let z = PhasePoint::new(e1.clone(), Field::mode(k, k - 1, 2.0))?;
    let once = wave_propagate(cfg, &z, mu, s + t)?;
    let twice = wave_propagate(cfg, &wave_propagate(cfg, &z, mu, s)?, mu, t)?;
    let diff = (&once.u - &twice.u).norm() + (&once.v - &twice.v).norm();
    out.push(Check::new(
        "propagator_semigroup",
        diff / (once.u.norm() + once.v.norm()),
        1e-10,
    ));

    // Action decomposition on sin(t) e_1 at dt = 1e-3.
    let n = (std::f64::consts::TAU / 1e-3).round() as usize;
    let grid = TimeGrid::new(0.0, std::f64::consts::TAU, n)?;
    let u = grid.times().map(|t| Field::mode(k, 0, t.sin())).collect();
    let v = grid.times().map(|t| Field::mode(k, 0, t.cos())).collect();
    let r = action_wave(cfg, &Path::wave(grid, u, v)?, 0.3, b)?;
    out.push(Check::new(
        "action_decomposition",
        r.residual_norm / r.value,
        1e-8,
    ));

    // Linear quasi-potential: V(e_1) = α_1/λ_1² when B = 0.
    let lin = v_heat(cfg, &e1, &Nonlinearity::Zero, MamOptions::default())?;
    let exact = cfg.alpha1() / cfg.noise()[0].powi(2);
    out.push(Check::new(
        "linear_quasipotential",
        rel(lin.action, exact),
        0.02,
    ));

    // Finite-horizon energy reaches the infinite-horizon value by 20/ω.
    let mu = 0.5;
    let omega = decay_fit(cfg, mu)?.omega;
    let zl = PhasePoint::new(e1.clone(), e1.clone())?;
    let gap = (linear_min_energy_finite(cfg, &zl, mu, 20.0 / omega)?
        - linear_min_energy_infinite(cfg, &zl, mu)?)
    .abs();
    out.push(Check::new("finite_to_infinite_horizon", gap, 1e-6));

    let spec = MollifierSpec::default();
    out.push(Check::new(
        "mollifier_mass",
        (spec.integral(1e-2, 2000) - 1.0).abs(),
        1e-12,
    ));

    // Skeleton round trip on a smooth heat path.
    let grid = TimeGrid::new(-2.0, 0.0, 4000)?;
    let phi = Path::from_fn(grid, |t| Field::mode(k, 0, 0.5 * (1.0 + t / 2.0).powi(2)))?;
    let psi = control_from_path(cfg, &phi, Equation::Heat, b)?;
    let back = skeleton_solve_heat(cfg, phi.position(0), b, &psi)?;
    out.push(Check::new(
        "skeleton_round_trip",
        back.sup_distance(&phi),
        1e-5,
    ));

    // Unperturbed wave flow is attracted to 0.
    let grid = TimeGrid::new(0.0, 40.0, 40_000)?;
    let flow = unperturbed_flow(
        cfg,
        &PhasePoint::new(e1.clone(), Field::zeros(k))?,
        0.1,
        b,
        &grid,
    )?;
    out.push(Check::new(
        "unperturbed_attraction",
        flow.last().u.norm(),
        1e-3,
    ));

    // With B = 0 the response to an initial velocity is exactly linear.
    let grid = TimeGrid::new(0.0, 5.0, 5000)?;
    let sup = |scale: f64| -> Result<f64, CliError> {
        let z0 = PhasePoint::new(Field::zeros(k), e1.scaled(scale))?;
        Ok(unperturbed_flow(cfg, &z0, 0.1, &Nonlinearity::Zero, &grid)?.sup_position_norm())
    };
    out.push(Check::new(
        "velocity_linear_scaling",
        rel(sup(2.0)?, 2.0 * sup(1.0)?),
        1e-12,
    ));

    let observed = b.lipschitz_spot_check(cfg, 200, 2.0, seed);
    out.push(Check::new(
        "lipschitz_bound",
        observed,
        1.1 * b.lipschitz_bound() + 1e-12,
    ));

    let grid = TimeGrid::new(0.0, 1.0, 1000)?;
    let plan = NoisePlan::new(seed, 0);
    let a = simulate_heat(cfg, &e1, 0.1, b, &grid, &plan)?;
    let c = simulate_heat(cfg, &e1, 0.1, b, &grid, &plan)?;
    out.push(Check::new(
        "deterministic_paths",
        if a == c { 0.0 } else { 1.0 },
        0.0,
    ));
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct VerifySummary {
    passed: usize,
    total: usize,
    checks: Vec<Check>,
}

pub fn run(
    cfg: &SpectralConfig,
    b: &Nonlinearity,
    seed: u64,
    name: &str,
    out: &mut Artifacts,
) -> Result<((&'static str, f64), Option<CliError>), CliError> {
    let checks = checks(cfg, b, seed)?;
    let passed = checks.iter().filter(|c| c.passed).count();
    let rows: Vec<(&str, f64, f64, bool)> = checks
        .iter()
        .map(|c| (c.name.as_str(), c.value, c.tolerance, c.passed))
        .collect();
    out.csv(
        "verify.csv",
        &["check", "value", "tolerance", "passed"],
        &rows,
    )?;
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.clone())
        .collect();
    let total = checks.len();
    out.json(
        "verify.json",
        name,
        &VerifySummary {
            passed,
            total,
            checks,
        },
    )?;
    let failure = (!failed.is_empty()).then(|| CliError::Verify(failed.join(", ")));
    Ok((("checks_passed", passed as f64), failure))
}
