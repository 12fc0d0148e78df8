use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::TimeGrid;
use super::integrator::{guard, Equation, Integrator};
use crate::error::{invalid, Result};
use crate::noise::NoisePlan;
use crate::spectral::{check_mass, Field, Nonlinearity, SpectralConfig};

/// `sup_{t ≤ T} |u^μ(t) - u(t)|_H` for one mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkRow {
    pub mu: f64,
    pub sup_difference: f64,
}

/// Runs the heat equation and the wave equation for every `μ` in
/// `mu_list` on one noise realisation and reports the sup distance of each
/// wave solution to the heat solution over the grid nodes.
#[allow(clippy::too_many_arguments)]
pub fn coupled_sk_run(
    cfg: &SpectralConfig,
    u0: &Field,
    v0: &Field,
    mu_list: &[f64],
    eps: f64,
    b: &Nonlinearity,
    grid: &TimeGrid,
    plan: &NoisePlan,
) -> Result<Vec<SkRow>> {
    let k = cfg.modes();
    u0.check_len(k)?;
    v0.check_len(k)?;
    for &mu in mu_list {
        check_mass(mu)?;
    }
    let heat = Integrator::new(cfg, Equation::Heat, grid.dt(), eps)?;
    let waves = mu_list
        .iter()
        .map(|&mu| Integrator::new(cfg, Equation::Wave { mu }, grid.dt(), eps))
        .collect::<Result<Vec<_>>>()?;

    let mut cursor = plan.cursor(k, 0);
    let mut triples = vec![[0.0; 3]; k];
    let mut scratch = vec![0.0; k];
    let mut hu = u0.coeffs().to_vec();
    let mut hv = vec![0.0; k];
    let mut states: Vec<(Vec<f64>, Vec<f64>)> = mu_list
        .iter()
        .map(|_| (hu.clone(), v0.coeffs().to_vec()))
        .collect();
    let mut sup = vec![0.0f64; mu_list.len()];
    for n in 0..grid.n_steps() {
        let noise = if eps > 0.0 {
            cursor.next_step(&mut triples);
            Some(triples.as_slice())
        } else {
            None
        };
        let t = grid.time(n + 1);
        heat.step(b, &mut hu, &mut hv, noise, &mut scratch);
        guard(&hu, t)?;
        for ((w, (u, v)), s) in waves.iter().zip(states.iter_mut()).zip(sup.iter_mut()) {
            w.step(b, u, v, noise, &mut scratch);
            guard(u, t)?;
            let d = u
                .iter()
                .zip(&hu)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            *s = s.max(d);
        }
    }
    Ok(mu_list
        .iter()
        .zip(sup)
        .map(|(&mu, sup_difference)| SkRow { mu, sup_difference })
        .collect())
}

/// Replica statistics of [`coupled_sk_run`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkStudy {
    pub mu: Vec<f64>,
    pub median: Vec<f64>,
    pub mean: Vec<f64>,
    /// `samples[r][j]`: replica `r`, mass `mu[j]`.
    pub samples: Vec<Vec<f64>>,
}

impl SkStudy {
    /// Medians strictly decrease along the (decreasing) mass ladder.
    pub fn is_monotone(&self) -> bool {
        self.median.windows(2).all(|w| w[1] < w[0])
    }
}

/// [`coupled_sk_run`] over `replicas` independent noise streams of
/// `master_seed`, in parallel.
#[allow(clippy::too_many_arguments)]
pub fn sk_convergence_study(
    cfg: &SpectralConfig,
    u0: &Field,
    v0: &Field,
    mu_list: &[f64],
    eps: f64,
    b: &Nonlinearity,
    grid: &TimeGrid,
    master_seed: u64,
    replicas: usize,
) -> Result<SkStudy> {
    if replicas == 0 {
        return Err(invalid("replicas", "at least one replica is required"));
    }
    let samples = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            coupled_sk_run(
                cfg,
                u0,
                v0,
                mu_list,
                eps,
                b,
                grid,
                &NoisePlan::new(master_seed, r),
            )
            .map(|rows| {
                rows.into_iter()
                    .map(|row| row.sup_difference)
                    .collect::<Vec<_>>()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let column = |j: usize| samples.iter().map(|s| s[j]).collect::<Vec<_>>();
    let median = (0..mu_list.len()).map(|j| median(&column(j))).collect();
    let mean = (0..mu_list.len())
        .map(|j| column(j).iter().sum::<f64>() / replicas as f64)
        .collect();
    Ok(SkStudy {
        mu: mu_list.to_vec(),
        median,
        mean,
        samples,
    })
}

pub(crate) fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
