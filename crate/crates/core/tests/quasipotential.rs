use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use skld::action::linear_min_energy_infinite;
use skld::quasipotential::{
    mam_minimize, regularized_control_experiment, sk_limit_study, v_exact_gradient, v_heat, v_mu,
    EndpointVelocity, MamOptions, MamProblem, Start,
};
use skld::spectral::GradientPotential;
use skld::{Field, Nonlinearity, PhasePoint, SpectralConfig};

fn random_field(rng: &mut ChaCha8Rng, k: usize) -> Field {
    Field::new((0..k).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn linear_minimum_action_matches_the_energy_oracle() {
    let cfg = SpectralConfig::white_noise(2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let cases: Vec<(Field, Field, f64)> = (0..20)
        .map(|_| {
            (
                random_field(&mut rng, 2),
                random_field(&mut rng, 2),
                rng.gen_range(0.2..1.0),
            )
        })
        .collect();
    cases.par_iter().for_each(|(x, y, mu)| {
        let p = MamProblem::wave(
            &cfg,
            &Nonlinearity::Zero,
            *mu,
            x.clone(),
            EndpointVelocity::Fixed(y.clone()),
        );
        let r = mam_minimize(&p).unwrap();
        let oracle =
            linear_min_energy_infinite(&cfg, &PhasePoint::new(x.clone(), y.clone()).unwrap(), *mu)
                .unwrap();
        assert!(
            ((r.action - oracle) / oracle).abs() < 0.02,
            "mu = {mu}: {} vs {oracle}",
            r.action
        );
        // The endpoint is a hard constraint.
        let end = r.path.last();
        assert!((&end.u - x).norm() < 1e-6 && (&end.v - y).norm() < 1e-6);
        assert!(r
            .horizon_ladder
            .windows(2)
            .all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-9)));
    });
}

#[test]
fn fixed_velocity_examples() {
    let cfg = SpectralConfig::white_noise(4).unwrap();
    let e1 = Field::mode(4, 0, 1.0);
    for (y, expected) in [(Field::zeros(4), 1.0), (e1.clone(), 1.5)] {
        let p = MamProblem::wave(
            &cfg,
            &Nonlinearity::Zero,
            0.5,
            e1.clone(),
            EndpointVelocity::Fixed(y),
        );
        let r = mam_minimize(&p).unwrap();
        assert!(r.converged);
        assert!(
            (r.action / expected - 1.0).abs() < 0.02,
            "{} vs {expected}",
            r.action
        );
    }
}

#[test]
fn gradient_case_prefers_rest_at_the_target() {
    let cfg = SpectralConfig::white_noise(4).unwrap();
    let b = Nonlinearity::sine(&cfg, 0.5).unwrap();
    let f = GradientPotential::sine(&cfg, 0.5)
        .certify(&cfg, &b, 8, 1)
        .unwrap();
    let x = Field::new(vec![0.8, 0.3, -0.2, 0.0]).unwrap();
    let exact = v_exact_gradient(&cfg, &x, None, 0.1, &f).unwrap();
    let r = v_mu(&cfg, &x, 0.1, &b, MamOptions::default()).unwrap();
    assert!(r.converged);
    assert!(
        (r.action / exact - 1.0).abs() < 0.02,
        "{} vs {exact}",
        r.action
    );
    let y = r.terminal_velocity();
    assert!(y.sobolev_norm(&cfg, -1.0) < 0.05 * x.norm(), "{y:?}");
    assert!((&r.path.last().u - &x).norm() < 1e-6);
}

#[test]
fn quasi_potential_is_lipschitz_in_the_target() {
    let cfg = SpectralConfig::new(std::f64::consts::PI, 3, 0.5, 1.0, 1).unwrap();
    let b = Nonlinearity::sine(&cfg, 0.3).unwrap();
    let x = Field::new(vec![0.6, 0.2, 0.0]).unwrap();
    let v = |target: &Field| {
        v_mu(&cfg, target, 0.3, &b, MamOptions::default())
            .unwrap()
            .action
    };
    let base = v(&x);
    let dir = Field::new(vec![0.0, 1.0, 0.5]).unwrap();
    let slopes: Vec<f64> = [2e-2, 1e-2]
        .iter()
        .map(|&eta| {
            let mut y = x.clone();
            y.axpy(eta / dir.sobolev_norm(&cfg, 1.0 + 2.0 * cfg.beta()), &dir);
            (v(&y) - base).abs() / eta
        })
        .collect();
    assert!(
        slopes.iter().all(|s| s.is_finite() && *s < 20.0),
        "{slopes:?}"
    );
    assert!((slopes[0] / slopes[1] - 1.0).abs() < 0.5, "{slopes:?}");
}

/// Least energy of the one-mode heat path from `r` to `1` in time `T`:
/// `(1 - r e^{-T})² / (1 - e^{-2T})`, decreasing in `r`.
fn ball_energy(r: f64, horizon: f64) -> f64 {
    (1.0 - r * (-horizon).exp()).powi(2) / (1.0 - (-2.0 * horizon).exp())
}

#[test]
fn ball_start_is_cheaper_than_the_origin() {
    let cfg = SpectralConfig::white_noise(2).unwrap();
    let x = Field::mode(2, 0, 1.0);
    let origin = v_heat(&cfg, &x, &Nonlinearity::Zero, MamOptions::default())
        .unwrap()
        .action;
    let ball = mam_minimize(
        &MamProblem::heat(&cfg, &Nonlinearity::Zero, x).with_start(Start::Ball { radius: 0.5 }),
    )
    .unwrap();
    assert!(ball.converged);
    assert!((ball.path.position(0).norm() - 0.5).abs() < 1e-9);
    for &(t, s) in &ball.horizon_ladder {
        assert!(
            (s / ball_energy(0.5, t) - 1.0).abs() < 0.01,
            "T = {t}: {s} vs {}",
            ball_energy(0.5, t)
        );
    }
    // Over all horizons the saving is |u0|² of the quadratic potential.
    assert!(
        ball.action >= origin - 0.25 - 1e-3 && ball.action < origin - 0.2,
        "{} vs {origin}",
        ball.action
    );
}

#[test]
fn gradient_ladder_is_flat() {
    let cfg = SpectralConfig::white_noise(4).unwrap();
    let t = sk_limit_study(
        &cfg,
        &Field::mode(4, 0, 1.0),
        &[1.0, 0.1],
        &Nonlinearity::Zero,
        MamOptions::default(),
    )
    .unwrap();
    assert!(t.all_converged());
    assert!((t.v - 1.0).abs() < 0.02);
    assert!(t.rows.iter().all(|r| r.gap < 0.02 * t.v));
}

#[test]
fn non_gradient_ladder_gaps_decrease() {
    // β = 1 makes the sine reaction non-gradient; the linear term damps
    // mode 1 only. γ₀ = 0.5 keeps every mass below the threshold 2.
    let cfg = SpectralConfig::new(std::f64::consts::PI, 8, 1.0, 1.0, 1).unwrap();
    let b = Nonlinearity::Sum(vec![
        Nonlinearity::sine(&cfg, 0.4).unwrap(),
        Nonlinearity::linear_per_mode(vec![0.1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
    ]);
    let x = Field::mode(8, 0, 2.0);
    let t = sk_limit_study(&cfg, &x, &[1.0, 0.3, 0.1, 0.03], &b, MamOptions::default()).unwrap();
    assert!(t.all_converged(), "{t:?}");
    assert!(t.gaps_decrease(), "{:?}", t.rows);
    assert!(t.rows.iter().all(|r| r.v_mu.is_finite() && r.v_mu >= 0.0));
}

#[test]
fn regularised_control_drifts_like_sqrt_delta() {
    let cfg = SpectralConfig::new(std::f64::consts::PI, 4, 0.5, 1.0, 1).unwrap();
    let b = Nonlinearity::sine(&cfg, 0.3).unwrap();
    let mu = 0.1;
    let base = v_mu(&cfg, &Field::mode(4, 0, 1.0), mu, &b, MamOptions::default()).unwrap();
    let t = regularized_control_experiment(&cfg, &base, mu, &b, &[0.0, 1e-1, 1e-2, 1e-3]).unwrap();
    assert_eq!(t.rows[0].drift, 0.0);
    assert!(t.round_trip_error < 1e-3);
    let ratios: Vec<f64> = t.rows[1..]
        .iter()
        .map(|r| r.drift_over_sqrt_delta.unwrap())
        .collect();
    assert!(ratios.iter().all(|&r| r < 1.0), "{ratios:?}");
    assert!(t
        .rows
        .iter()
        .all(|r| r.control_energy <= t.control_energy * (1.0 + 1e-12)));
}
