use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::domain::{quadratic_weights, ExitDomain};
use super::run::{run_replicas, ExitProblem, ExitRecord};
use crate::error::{invalid, Error, Result};

/// Largest censored fraction a summary accepts.
pub const MAX_CENSORED_FRACTION: f64 = 0.05;

const BOOTSTRAP_RESAMPLES: usize = 2000;

/// Exit counts by dominant direction: `counts[k] = [negative, positive]`
/// counts the exits whose largest coefficient in absolute value is mode `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionHistogram {
    pub counts: Vec<[u64; 2]>,
}

impl DirectionHistogram {
    pub fn from_records(records: &[ExitRecord], modes: usize) -> Self {
        let mut counts = vec![[0u64; 2]; modes];
        for r in records.iter().filter(|r| !r.hit_max_steps) {
            let c = r.exit_point.coeffs();
            if let Some((k, x)) = c
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            {
                counts[k][(*x > 0.0) as usize] += 1;
            }
        }
        Self { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|c| c[0] + c[1]).sum()
    }
}

/// Summary of one `ε` level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitStats {
    pub eps: f64,
    pub replicas: usize,
    pub censored: usize,
    /// Mean over all replicas, censored ones entering at their censoring
    /// time, so it is a lower bound whenever `censored > 0`.
    pub mean_tau: f64,
    pub median_tau: f64,
    pub eps_log_mean: f64,
    /// Percentile bootstrap interval (95%) of `ε log(mean τ)`.
    pub ci_low: f64,
    pub ci_high: f64,
    pub target: Option<f64>,
    /// Fraction of replicas with `τ ∈ [e^{(V-η)/ε}, e^{(V+η)/ε}]`,
    /// `η = 0.3 V`, when a target `V` is known.
    pub window_fraction: Option<f64>,
    pub exit_location_histogram: DirectionHistogram,
}

impl ExitStats {
    pub fn censored_fraction(&self) -> f64 {
        self.censored as f64 / self.replicas as f64
    }

    /// Summarises `records`; refuses when more than 5% are censored.
    pub fn summarize(
        eps: f64,
        records: &[ExitRecord],
        target: Option<f64>,
        bootstrap_seed: u64,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(invalid("replicas", "at least one record is required"));
        }
        let replicas = records.len();
        let censored = records.iter().filter(|r| r.hit_max_steps).count();
        if censored as f64 > MAX_CENSORED_FRACTION * replicas as f64 {
            return Err(Error::Censored { censored, replicas });
        }
        let taus: Vec<f64> = records.iter().map(|r| r.tau).collect();
        let mean_tau = mean(&taus);
        let mut sorted = taus.clone();
        sorted.sort_by(f64::total_cmp);
        let median_tau = crate::dynamics::median(&sorted);
        let mut rng = ChaCha8Rng::seed_from_u64(bootstrap_seed);
        let mut boot: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
            .map(|_| {
                let s: f64 = (0..replicas)
                    .map(|_| taus[rng.gen_range(0..replicas)])
                    .sum();
                eps * (s / replicas as f64).ln()
            })
            .collect();
        boot.sort_by(f64::total_cmp);
        let pick =
            |q: f64| boot[((q * (boot.len() - 1) as f64).round() as usize).min(boot.len() - 1)];
        let window_fraction = target.map(|v| {
            let eta = 0.3 * v;
            let (lo, hi) = (((v - eta) / eps).exp(), ((v + eta) / eps).exp());
            taus.iter().filter(|&&t| t >= lo && t <= hi).count() as f64 / replicas as f64
        });
        let modes = records[0].exit_point.len();
        Ok(Self {
            eps,
            replicas,
            censored,
            mean_tau,
            median_tau,
            eps_log_mean: eps * mean_tau.ln(),
            ci_low: pick(0.025),
            ci_high: pick(0.975),
            target,
            window_fraction,
            exit_location_histogram: DirectionHistogram::from_records(records, modes),
        })
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Seed used for the replicas of level `level` of a ladder.
pub fn level_seed(master_seed: u64, level: usize) -> u64 {
    master_seed.wrapping_add((level as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// `ε log E τ` along a ladder of noise strengths.
///
/// The target defaults to the closed-form `inf_{∂G} V` when `B` is linear
/// and diagonal; pass `target` to override it, e.g. with a minimum-action
/// value.
pub fn estimate_exit_scaling(
    problem: &ExitProblem,
    eps_ladder: &[f64],
    replicas: usize,
    master_seed: u64,
    target: Option<f64>,
) -> Result<Vec<ExitStats>> {
    let target = target.or_else(|| problem.domain.boundary_potential(&problem.cfg, &problem.b));
    eps_ladder
        .iter()
        .enumerate()
        .map(|(i, &eps)| {
            let seed = level_seed(master_seed, i);
            let records = run_replicas(problem, eps, replicas, seed)?;
            ExitStats::summarize(eps, &records, target, seed)
        })
        .collect()
}

/// Which ends of a mode axis a cap covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pole {
    Positive,
    Negative,
    Both,
}

/// Closed boundary subset `{ x ∈ ∂G : ±x_k/|x| ≥ threshold }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cap {
    pub mode: usize,
    pub pole: Pole,
    pub threshold: f64,
}

impl Cap {
    pub fn new(mode: usize, pole: Pole, threshold: f64) -> Self {
        Self {
            mode,
            pole,
            threshold,
        }
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        let n = point.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n == 0.0 {
            return false;
        }
        let d = point[self.mode] / n;
        match self.pole {
            Pole::Positive => d >= self.threshold,
            Pole::Negative => -d >= self.threshold,
            Pole::Both => d.abs() >= self.threshold,
        }
    }

    /// `inf_N V` over a ball boundary for a quadratic quasi-potential with
    /// weights `c`: putting a share `s ≥ t²` of `r²` on mode `k` and the rest
    /// on the cheapest other mode is linear in `s`, so an endpoint wins.
    fn potential(&self, c: &[f64], radius: f64) -> f64 {
        let t2 = self.threshold.max(0.0).powi(2);
        let others = c
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != self.mode)
            .map(|(_, &x)| x)
            .fold(f64::INFINITY, f64::min);
        let ck = c[self.mode];
        let v = if others.is_finite() {
            ck.min(t2 * ck + (1.0 - t2) * others)
        } else {
            ck
        };
        radius * radius * v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapReport {
    pub cap: Cap,
    pub hits: usize,
    /// Hits over the number of replicas that exited.
    pub fraction: f64,
    /// Binomial standard error of `fraction`.
    pub std_error: f64,
    /// Closed-form `inf_N V`, when available.
    pub potential: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitPlaceReport {
    pub eps: f64,
    pub replicas: usize,
    pub censored: usize,
    pub histogram: DirectionHistogram,
    pub caps: Vec<CapReport>,
    /// Closed-form `inf_{∂G} V`, when available.
    pub boundary_potential: Option<f64>,
}

/// Where replicas leave `G`, and how often they land in each cap.
pub fn exit_place_histogram(
    problem: &ExitProblem,
    eps: f64,
    replicas: usize,
    master_seed: u64,
    caps: &[Cap],
) -> Result<ExitPlaceReport> {
    let k = problem.cfg.modes();
    for c in caps {
        if c.mode >= k {
            return Err(invalid(
                "cap.mode",
                format!("must be below the mode count {k}"),
            ));
        }
        if !(c.threshold.is_finite() && c.threshold.abs() <= 1.0) {
            return Err(invalid("cap.threshold", "must lie in [-1, 1]"));
        }
    }
    let records = run_replicas(problem, eps, replicas, master_seed)?;
    Ok(place_report(problem, eps, &records, caps))
}

/// Builds the report from existing records.
pub fn place_report(
    problem: &ExitProblem,
    eps: f64,
    records: &[ExitRecord],
    caps: &[Cap],
) -> ExitPlaceReport {
    let exited: Vec<&ExitRecord> = records.iter().filter(|r| !r.hit_max_steps).collect();
    let n = exited.len().max(1) as f64;
    let weights = quadratic_weights(&problem.cfg, &problem.b);
    let radius = match problem.domain {
        ExitDomain::Ball { radius } => Some(radius),
        ExitDomain::Halfspace { .. } => None,
    };
    let caps = caps
        .iter()
        .map(|&cap| {
            let hits = exited
                .iter()
                .filter(|r| cap.contains(r.exit_point.coeffs()))
                .count();
            let p = hits as f64 / n;
            CapReport {
                cap,
                hits,
                fraction: p,
                std_error: (p * (1.0 - p) / n).sqrt(),
                potential: weights
                    .as_ref()
                    .zip(radius)
                    .map(|(c, r)| cap.potential(c, r)),
            }
        })
        .collect();
    ExitPlaceReport {
        eps,
        replicas: records.len(),
        censored: records.len() - exited.len(),
        histogram: DirectionHistogram::from_records(records, problem.cfg.modes()),
        caps,
        boundary_potential: problem.domain.boundary_potential(&problem.cfg, &problem.b),
    }
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsTest {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = (na * nb / (na + nb)).sqrt();
    let lambda = (ne + 0.12 + 0.11 / ne) * d;
    KsTest {
        statistic: d,
        p_value: kolmogorov_tail(lambda),
    }
}

/// `P(K > λ)` for the Kolmogorov distribution.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Field;

    fn rec(tau: f64, point: Vec<f64>, censored: bool) -> ExitRecord {
        ExitRecord {
            tau,
            exit_point: Field::new(point).unwrap(),
            exit_velocity: None,
            hit_max_steps: censored,
        }
    }

    #[test]
    fn summary_recomputes_eps_log_mean() {
        let records: Vec<_> = (1..=100).map(|i| rec(i as f64, vec![1.0], false)).collect();
        let s = ExitStats::summarize(0.1, &records, Some(0.3), 7).unwrap();
        assert!((s.mean_tau - 50.5).abs() < 1e-12);
        assert!((s.eps_log_mean - 0.1 * 50.5f64.ln()).abs() < 1e-12);
        assert!(s.ci_low <= s.eps_log_mean && s.eps_log_mean <= s.ci_high);
        assert_eq!(s.exit_location_histogram.counts, vec![[0, 100]]);
    }

    #[test]
    fn heavy_censoring_is_refused() {
        let mut records: Vec<_> = (0..90).map(|_| rec(1.0, vec![1.0], false)).collect();
        records.extend((0..10).map(|_| rec(5.0, vec![0.1], true)));
        assert!(matches!(
            ExitStats::summarize(0.1, &records, None, 1),
            Err(Error::Censored {
                censored: 10,
                replicas: 100
            })
        ));
    }

    #[test]
    fn cap_potential_matches_brute_force() {
        let c = [1.0, 4.0, 9.0];
        let cap = Cap::new(1, Pole::Both, 0.9);
        let mut best = f64::INFINITY;
        for i in 0..=400 {
            for j in 0..=400 {
                let th = std::f64::consts::PI * i as f64 / 400.0;
                let ph = std::f64::consts::TAU * j as f64 / 400.0;
                let x = [th.sin() * ph.cos(), th.cos(), th.sin() * ph.sin()];
                if cap.contains(&x) {
                    best = best.min(x.iter().zip(&c).map(|(x, c)| c * x * x).sum::<f64>());
                }
            }
        }
        // The grid only approaches the cap edge to within π/400.
        let v = cap.potential(&c, 1.0);
        assert!(best >= v - 1e-12 && best - v < 0.02, "{best} vs {v}");
    }

    #[test]
    fn ks_detects_shift_and_accepts_same_law() {
        let a: Vec<f64> = (0..500).map(|i| (i as f64 + 0.5) / 500.0).collect();
        let b: Vec<f64> = (0..400).map(|i| (i as f64 + 0.25) / 400.0).collect();
        assert!(ks_two_sample(&a, &b).p_value > 0.5);
        let c: Vec<f64> = b.iter().map(|x| x + 0.2).collect();
        assert!(ks_two_sample(&a, &c).p_value < 1e-6);
    }
}
