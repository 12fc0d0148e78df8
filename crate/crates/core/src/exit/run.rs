use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::domain::ExitDomain;
use crate::dynamics::{guard, Equation, Integrator, TimeGrid};
use crate::error::{invalid, Result};
use crate::noise::NoisePlan;
use crate::spectral::{Field, Nonlinearity, PhasePoint, SpectralConfig};

/// Step budget per replica unless overridden.
pub const DEFAULT_MAX_STEPS: u64 = 10_000_000;

/// Everything about an exit experiment except `ε` and the seed.
#[derive(Debug, Clone)]
pub struct ExitProblem {
    pub cfg: SpectralConfig,
    pub b: Nonlinearity,
    pub equation: Equation,
    pub z0: PhasePoint,
    pub domain: ExitDomain,
    pub dt: f64,
    pub max_steps: u64,
}

impl ExitProblem {
    /// Starts at rest at the origin with the default budget.
    pub fn new(
        cfg: SpectralConfig,
        b: Nonlinearity,
        equation: Equation,
        domain: ExitDomain,
        dt: f64,
    ) -> Self {
        let k = cfg.modes();
        Self {
            cfg,
            b,
            equation,
            z0: PhasePoint::zeros(k),
            domain,
            dt,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }

    pub fn with_start(mut self, z0: PhasePoint) -> Self {
        self.z0 = z0;
        self
    }

    pub fn with_max_steps(mut self, max_steps: u64) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.cfg.modes();
        self.z0.u.check_len(k)?;
        self.z0.v.check_len(k)?;
        self.domain.validate(k)?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid("dt", "must be a positive real"));
        }
        if self.max_steps == 0 {
            return Err(invalid("max_steps", "must be positive"));
        }
        if !(self.domain.boundary_distance(self.z0.u.coeffs()) < 0.0) {
            return Err(invalid(
                "z0",
                "the start position must lie strictly inside the domain",
            ));
        }
        Ok(())
    }

    /// Runs the noiseless flow over `[0, horizon]` and reports whether it
    /// stays inside `G`. This is only evidence for the confinement the
    /// asymptotics assume, not a proof for all time.
    pub fn flow_stays_inside(&self, horizon: f64) -> Result<bool> {
        self.validate()?;
        let grid = TimeGrid::covering(horizon, self.dt)?;
        let integrator = Integrator::new(&self.cfg, self.equation, grid.dt(), 0.0)?;
        let (mut u, mut v) = (self.z0.u.coeffs().to_vec(), self.z0.v.coeffs().to_vec());
        let mut scratch = vec![0.0; u.len()];
        for _ in 0..grid.n_steps() {
            integrator.step(&self.b, &mut u, &mut v, None, &mut scratch);
            if self.domain.boundary_distance(&u) >= 0.0 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Outcome of one replica.
///
/// For a censored replica `tau` is the censoring time `max_steps · dt` and
/// the point and velocity are the final state, so the run can be resumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitRecord {
    pub tau: f64,
    pub exit_point: Field,
    pub exit_velocity: Option<Field>,
    pub hit_max_steps: bool,
}

/// First time the position leaves `G`.
///
/// The crossing time is refined by linear interpolation of the boundary
/// distance between the bracketing steps. Diffusive excursions inside a
/// step are not seen, which biases `τ` upwards by an amount that vanishes
/// as `dt → 0`. The reported exit point is the interpolated state projected
/// onto `∂G`.
pub fn run_exit(problem: &ExitProblem, eps: f64, plan: &NoisePlan) -> Result<ExitRecord> {
    problem.validate()?;
    if !(eps.is_finite() && eps > 0.0) {
        return Err(invalid("eps", "must be a positive real"));
    }
    let k = problem.cfg.modes();
    let integrator = Integrator::new(&problem.cfg, problem.equation, problem.dt, eps)?;
    let wave = problem.equation.mass().is_some();
    let mut cursor = plan.cursor(k, 0);
    let mut triples = vec![[0.0; 3]; k];
    let mut scratch = vec![0.0; k];
    let mut u = problem.z0.u.coeffs().to_vec();
    let mut v = problem.z0.v.coeffs().to_vec();
    let (mut pu, mut pv) = (u.clone(), v.clone());
    let mut d_prev = problem.domain.boundary_distance(&u);
    for n in 0..problem.max_steps {
        pu.copy_from_slice(&u);
        pv.copy_from_slice(&v);
        cursor.next_step(&mut triples);
        integrator.step(&problem.b, &mut u, &mut v, Some(&triples), &mut scratch);
        let d = problem.domain.boundary_distance(&u);
        if d >= 0.0 {
            // d_prev < 0 <= d, so theta lies in (0, 1].
            let theta = d_prev / (d_prev - d);
            let t0 = n as f64 * problem.dt;
            let tau = (t0 + theta * problem.dt).min(next_below((n + 1) as f64 * problem.dt));
            let lerp = |a: &[f64], b: &[f64]| -> Vec<f64> {
                a.iter().zip(b).map(|(x, y)| x + theta * (y - x)).collect()
            };
            let mut point = lerp(&pu, &u);
            problem.domain.project(&mut point);
            return Ok(ExitRecord {
                tau,
                exit_point: Field::from_vec_unchecked(point),
                exit_velocity: wave.then(|| Field::from_vec_unchecked(lerp(&pv, &v))),
                hit_max_steps: false,
            });
        }
        guard(&u, (n + 1) as f64 * problem.dt)?;
        d_prev = d;
    }
    Ok(ExitRecord {
        tau: problem.max_steps as f64 * problem.dt,
        exit_point: Field::from_vec_unchecked(u),
        exit_velocity: wave.then(|| Field::from_vec_unchecked(v)),
        hit_max_steps: true,
    })
}

fn next_below(x: f64) -> f64 {
    if x > 0.0 {
        f64::from_bits(x.to_bits() - 1)
    } else {
        x
    }
}

/// Runs replicas `0..replicas` in parallel. Replica `i` draws its noise
/// from `NoisePlan::new(master_seed, i)`, so the records do not depend on
/// the thread count.
pub fn run_replicas(
    problem: &ExitProblem,
    eps: f64,
    replicas: usize,
    master_seed: u64,
) -> Result<Vec<ExitRecord>> {
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| run_exit(problem, eps, &NoisePlan::new(master_seed, r)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ou(radius: f64) -> ExitProblem {
        let cfg = SpectralConfig::white_noise(1).unwrap();
        ExitProblem::new(
            cfg,
            Nonlinearity::Zero,
            Equation::Heat,
            ExitDomain::Ball { radius },
            1e-3,
        )
    }

    #[test]
    fn tau_is_bracketed_and_point_on_boundary() {
        let p = ou(0.35);
        for r in 0..20 {
            let rec = run_exit(&p, 0.06, &NoisePlan::new(3, r)).unwrap();
            assert!(!rec.hit_max_steps);
            assert!(rec.tau > 0.0);
            let n = (rec.tau / p.dt).floor();
            assert!(rec.tau > n * p.dt && rec.tau < (n + 1.0) * p.dt);
            assert!(p.domain.boundary_distance(rec.exit_point.coeffs()).abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_noise_is_censored() {
        let p = ou(0.35).with_max_steps(2000);
        let rec = run_exit(&p, 1e-8, &NoisePlan::new(1, 0)).unwrap();
        assert!(rec.hit_max_steps);
        assert_eq!(rec.tau, 2.0);
        assert!(p.flow_stays_inside(10.0).unwrap());
    }

    #[test]
    fn start_outside_is_rejected() {
        let p =
            ou(0.35).with_start(PhasePoint::new(Field::mode(1, 0, 0.5), Field::zeros(1)).unwrap());
        assert!(run_exit(&p, 0.1, &NoisePlan::new(1, 0)).is_err());
    }
}
