use rayon::prelude::*;
use skld::action::control_from_path;
use skld::dynamics::{
    coupled_sk_run, simulate_heat, simulate_wave, skeleton_solve_heat, skeleton_solve_wave,
    unperturbed_flow, Equation, Path, TimeGrid,
};
use skld::{Field, NoisePlan, Nonlinearity, PhasePoint, SpectralConfig};

fn default_nonlinear() -> (SpectralConfig, Nonlinearity) {
    let cfg = SpectralConfig::white_noise(8).unwrap();
    let b = Nonlinearity::sine(&cfg, 0.5).unwrap();
    (cfg, b)
}

fn sample_var(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / (x.len() - 1) as f64
}

#[test]
fn heat_modes_have_the_ou_variance() {
    let cfg = SpectralConfig::new(std::f64::consts::PI, 3, 0.5, 1.0, 1).unwrap();
    let eps = 0.5;
    let t = 1.5;
    let grid = TimeGrid::new(0.0, t, 15).unwrap();
    let n = 10_000;
    let finals: Vec<Vec<f64>> = (0..n as u64)
        .into_par_iter()
        .map(|r| {
            let p = simulate_heat(
                &cfg,
                &Field::zeros(3),
                eps,
                &Nonlinearity::Zero,
                &grid,
                &NoisePlan::new(17, r),
            )
            .unwrap();
            p.position(15).coeffs().to_vec()
        })
        .collect();
    for k in 0..3 {
        let (a, l) = (cfg.eigenvalues()[k], cfg.noise()[k]);
        let exact = eps * l * l * (1.0 - (-2.0 * a * t).exp()) / (2.0 * a);
        let col: Vec<f64> = finals.iter().map(|f| f[k]).collect();
        let rel = (sample_var(&col) / exact - 1.0).abs();
        // Relative standard error of a sample variance is √(2/n) ≈ 1.4%.
        assert!(rel < 4.0 * (2.0 / n as f64).sqrt(), "mode {k}: {rel}");
    }
}

#[test]
fn wave_modes_reach_the_stationary_covariance() {
    let cfg = SpectralConfig::white_noise(2).unwrap();
    let (mu, eps) = (0.25, 0.3);
    let grid = TimeGrid::new(0.0, 20.0, 400).unwrap();
    let n = 10_000;
    let finals: Vec<PhasePoint> = (0..n as u64)
        .into_par_iter()
        .map(|r| {
            simulate_wave(
                &cfg,
                &PhasePoint::zeros(2),
                mu,
                eps,
                &Nonlinearity::Zero,
                &grid,
                &NoisePlan::new(8, r),
            )
            .unwrap()
            .last()
        })
        .collect();
    let tol = 4.0 * (2.0 / n as f64).sqrt();
    for k in 0..2 {
        // Lyapunov solution of du = v dt, μ dv = (-αu - v) dt + √ε λ dβ.
        let a = cfg.eigenvalues()[k];
        let uu: Vec<f64> = finals.iter().map(|z| z.u.coeffs()[k]).collect();
        let vv: Vec<f64> = finals.iter().map(|z| z.v.coeffs()[k]).collect();
        assert!((sample_var(&uu) / (eps / (2.0 * a)) - 1.0).abs() < tol);
        assert!((sample_var(&vv) / (eps / (2.0 * mu)) - 1.0).abs() < tol);
        let cross = uu.iter().zip(&vv).map(|(x, y)| x * y).sum::<f64>() / n as f64;
        let scale = (eps / (2.0 * a) * eps / (2.0 * mu)).sqrt();
        assert!(cross.abs() < 4.0 * scale / (n as f64).sqrt());
    }
}

/// Classical RK4 for `μ u'' + u' + c u = 0`.
fn rk4_damped(mu: f64, c: f64, u0: f64, v0: f64, t: f64, steps: usize) -> f64 {
    let h = t / steps as f64;
    let f = |u: f64, v: f64| (v, (-c * u - v) / mu);
    let (mut u, mut v) = (u0, v0);
    for _ in 0..steps {
        let k1 = f(u, v);
        let k2 = f(u + 0.5 * h * k1.0, v + 0.5 * h * k1.1);
        let k3 = f(u + 0.5 * h * k2.0, v + 0.5 * h * k2.1);
        let k4 = f(u + h * k3.0, v + h * k3.1);
        u += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        v += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
    }
    u
}

#[test]
fn wave_with_linear_reaction_matches_ode() {
    let cfg = SpectralConfig::white_noise(1).unwrap();
    let (mu, kappa) = (0.3, 0.7);
    let b = Nonlinearity::linear(kappa);
    let z0 = PhasePoint::new(Field::mode(1, 0, 1.0), Field::mode(1, 0, -0.5)).unwrap();
    let run = |n: usize| {
        unperturbed_flow(&cfg, &z0, mu, &b, &TimeGrid::new(0.0, 1.0, n).unwrap())
            .unwrap()
            .last()
            .u
            .coeffs()[0]
    };
    // The reaction is frozen at the left node, so the scheme is first
    // order; one Richardson step removes the leading error.
    let refined = 2.0 * run(4000) - run(2000);
    let oracle = rk4_damped(mu, 1.0 + kappa, 1.0, -0.5, 1.0, 100_000);
    assert!((refined - oracle).abs() < 1e-6, "{refined} vs {oracle}");
}

#[test]
fn noiseless_flow_from_rest_stays_at_rest() {
    let (cfg, b) = default_nonlinear();
    let p = unperturbed_flow(
        &cfg,
        &PhasePoint::zeros(8),
        0.1,
        &b,
        &TimeGrid::new(0.0, 2.0, 200).unwrap(),
    )
    .unwrap();
    assert_eq!(p.sup_energy_norm(&cfg), 0.0);
}

#[test]
fn noiseless_flow_is_attracted_to_zero() {
    let (cfg, b) = default_nonlinear();
    let z0 = PhasePoint::new(
        Field::new(vec![1.0, -0.5, 0.3, 0.0, 0.1, 0.0, 0.0, 0.05]).unwrap(),
        Field::new(vec![2.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap(),
    )
    .unwrap();
    for mu in [1.0, 0.1, 0.01] {
        let p = unperturbed_flow(
            &cfg,
            &z0,
            mu,
            &b,
            &TimeGrid::new(0.0, 25.0, 25_000).unwrap(),
        )
        .unwrap();
        let ratio = p.last().energy_norm(&cfg) / z0.energy_norm(&cfg);
        assert!(ratio < 1e-3, "mu = {mu}: {ratio}");
    }
}

#[test]
fn displacement_scales_linearly_with_initial_velocity() {
    let cfg = SpectralConfig::white_noise(4).unwrap();
    let grid = TimeGrid::new(0.0, 1.0, 500).unwrap();
    let v0 = Field::new(vec![1.0, -2.0, 0.5, 3.0]).unwrap();
    let sup = |s: f64| {
        let z0 = PhasePoint::new(Field::zeros(4), v0.scaled(s)).unwrap();
        unperturbed_flow(&cfg, &z0, 0.05, &Nonlinearity::Zero, &grid)
            .unwrap()
            .sup_position_norm()
    };
    let (one, two) = (sup(1.0), sup(2.0));
    assert!((two / one - 2.0).abs() < 1e-12);
}

#[test]
fn energy_stays_bounded_along_the_flow() {
    let (cfg, b) = default_nonlinear();
    let mu = 0.2;
    let z0 = PhasePoint::new(Field::mode(8, 0, 1.0), Field::mode(8, 1, 3.0)).unwrap();
    let grid = TimeGrid::new(0.0, 10.0, 10_000).unwrap();
    let p = unperturbed_flow(&cfg, &z0, mu, &b, &grid).unwrap();
    let h_minus = |v: &Field| v.sobolev_norm_sq(&cfg, -1.0);
    let vs = p.velocities().unwrap();
    let energy = |i: usize| mu * h_minus(&vs[i]) + p.position(i).norm().powi(2);
    let e0 = energy(0);
    let mut dissipated = 0.0;
    let mut worst = 0.0f64;
    for i in 0..grid.n_steps() {
        dissipated += 0.5 * grid.dt() * (h_minus(&vs[i]) + h_minus(&vs[i + 1]));
        worst = worst.max((energy(i + 1) + dissipated) / e0);
    }
    assert!(worst < 5.0, "{worst}");
}

#[test]
fn noiseless_sk_gap_is_the_mode_discrepancy() {
    let cfg = SpectralConfig::white_noise(1).unwrap();
    let mu = 0.01;
    let grid = TimeGrid::new(0.0, 1.0, 1000).unwrap();
    let rows = coupled_sk_run(
        &cfg,
        &Field::mode(1, 0, 1.0),
        &Field::zeros(1),
        &[mu],
        0.0,
        &Nonlinearity::Zero,
        &grid,
        &NoisePlan::new(0, 0),
    )
    .unwrap();
    let disc = (1.0f64 - 4.0 * mu).sqrt();
    let (r1, r2) = ((-1.0 + disc) / (2.0 * mu), (-1.0 - disc) / (2.0 * mu));
    let expected = grid
        .times()
        .map(|t| ((r2 * (r1 * t).exp() - r1 * (r2 * t).exp()) / (r2 - r1) - (-t).exp()).abs())
        .fold(0.0, f64::max);
    assert!(
        (rows[0].sup_difference - expected).abs() < 1e-12,
        "{} vs {expected}",
        rows[0].sup_difference
    );
}

#[test]
fn coupled_differences_are_uncorrelated_across_modes() {
    let cfg = SpectralConfig::white_noise(2).unwrap();
    let grid = TimeGrid::new(0.0, 1.0, 100).unwrap();
    let n = 10_000;
    let d: Vec<[f64; 2]> = (0..n as u64)
        .into_par_iter()
        .map(|r| {
            let plan = NoisePlan::new(99, r);
            let h = simulate_heat(
                &cfg,
                &Field::zeros(2),
                0.1,
                &Nonlinearity::Zero,
                &grid,
                &plan,
            )
            .unwrap();
            let w = simulate_wave(
                &cfg,
                &PhasePoint::zeros(2),
                0.05,
                0.1,
                &Nonlinearity::Zero,
                &grid,
                &plan,
            )
            .unwrap();
            let (a, b) = (w.position(100).coeffs(), h.position(100).coeffs());
            [a[0] - b[0], a[1] - b[1]]
        })
        .collect();
    let mean = |k: usize| d.iter().map(|x| x[k]).sum::<f64>() / n as f64;
    let (m0, m1) = (mean(0), mean(1));
    let cov = d.iter().map(|x| (x[0] - m0) * (x[1] - m1)).sum::<f64>();
    let v0 = d.iter().map(|x| (x[0] - m0).powi(2)).sum::<f64>();
    let v1 = d.iter().map(|x| (x[1] - m1).powi(2)).sum::<f64>();
    let rho = cov / (v0 * v1).sqrt();
    assert!(rho.abs() < 3.0 / (n as f64).sqrt(), "{rho}");
}

fn smooth_path(grid: TimeGrid) -> Path {
    Path::from_fn(grid, |t| {
        Field::new(vec![
            t.sin() + 0.2 * t,
            0.5 * (2.0 * t).cos() - 0.5,
            0.1 * t * t,
        ])
        .unwrap()
    })
    .unwrap()
}

#[test]
fn skeleton_round_trip_is_second_order() {
    let cfg = SpectralConfig::new(std::f64::consts::PI, 3, 0.5, 1.0, 1).unwrap();
    let b = Nonlinearity::sine(&cfg, 0.4).unwrap();
    let err = |n: usize, eq: Equation| {
        let phi = smooth_path(TimeGrid::new(0.0, 2.0, n).unwrap());
        let psi = control_from_path(&cfg, &phi, eq, &b).unwrap();
        let back = match eq {
            Equation::Heat => skeleton_solve_heat(&cfg, phi.position(0), &b, &psi).unwrap(),
            Equation::Wave { mu } => {
                let v0 = Field::new(vec![1.2, 0.0, 0.0]).unwrap();
                skeleton_solve_wave(
                    &cfg,
                    &PhasePoint::new(phi.position(0).clone(), v0).unwrap(),
                    mu,
                    &b,
                    &psi,
                )
                .unwrap()
            }
        };
        back.sup_distance(&phi)
    };
    for eq in [Equation::Heat, Equation::Wave { mu: 0.3 }] {
        let (e1, e2) = (err(200, eq), err(400, eq));
        assert!(e1 < 1e-3, "{eq:?}: {e1}");
        assert!(e1 / e2 > 3.0, "{eq:?}: {e1} -> {e2}");
    }
}

#[test]
fn halving_the_step_is_first_order_or_better() {
    let (cfg, b) = default_nonlinear();
    let z0 = PhasePoint::new(Field::mode(8, 0, 1.0), Field::mode(8, 2, 1.0)).unwrap();
    let run = |n: usize| {
        unperturbed_flow(&cfg, &z0, 0.1, &b, &TimeGrid::new(0.0, 2.0, n).unwrap()).unwrap()
    };
    let (a, b2, c) = (run(200), run(400), run(800));
    let d1 = a.sup_distance(&b2.coarsened().unwrap());
    let d2 = b2.sup_distance(&c.coarsened().unwrap());
    assert!(d1 / d2 > 1.8, "{d1} -> {d2}");
}
