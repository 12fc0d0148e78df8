use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use skld::action::{action_heat, action_wave, ActionReport};
use skld::dynamics::{
    simulate_heat, simulate_wave, sk_convergence_study, Equation, Path, SkStudy, TimeGrid,
};
use skld::exit::{
    level_seed, place_report, run_replicas, ExitPlaceReport, ExitProblem, ExitRecord, ExitStats,
};
use skld::quasipotential::{
    mam_minimize, sk_limit_study, EndpointVelocity, MamProblem, SkLimitTable,
};
use skld::spectral::check_hypotheses;
use skld::{Field, NoisePlan, Nonlinearity, SpectralConfig};

use crate::config::{
    field, field_or_zero, phase_point, ActionParams, ExitParams, Experiment, ExperimentConfig,
    PathSpec, QuasipotentialParams, SimulateParams, SkConvergeParams, SkLimitParams,
};
use crate::error::CliError;
use crate::output::{Artifacts, Provenance};
use crate::verify;

/// What an experiment produced. `failure` is set when the run finished but
/// its result must not be trusted (non-convergence, censoring); the files
/// are still written so the failure can be inspected.
#[derive(Debug)]
pub struct Outcome {
    pub artifacts: Artifacts,
    pub metric: (&'static str, f64),
    pub failure: Option<CliError>,
}

pub fn run(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let cfg = config.spectral()?;
    let b = config.nonlinearity(&cfg)?;
    let equation = config.equation()?;
    let mut out = Artifacts::new(Provenance::new(config.hash()));
    let name = config.experiment.name();
    let (metric, failure) = match &config.experiment {
        Experiment::Simulate(p) => simulate(&cfg, &b, equation, p, config.seed, name, &mut out)?,
        Experiment::SkConverge(p) => sk_converge(&cfg, &b, p, config.seed, name, &mut out)?,
        Experiment::Action(p) => action(&cfg, &b, equation, p, name, &mut out)?,
        Experiment::Quasipotential(p) => quasipotential(&cfg, &b, equation, p, name, &mut out)?,
        Experiment::SkLimit(p) => sk_limit(&cfg, &b, p, name, &mut out)?,
        Experiment::Exit(p) => exit(&cfg, &b, equation, p, config.seed, name, &mut out)?,
        Experiment::Verify(_) => verify::run(&cfg, &b, config.seed, name, &mut out)?,
    };
    Ok(Outcome {
        artifacts: out,
        metric,
        failure,
    })
}

type Step = Result<((&'static str, f64), Option<CliError>), CliError>;

/// One row per (time node, mode) of a path; `replica` distinguishes sample
/// paths, `v` is empty for heat paths.
#[derive(Serialize)]
struct PathRow {
    replica: usize,
    t: f64,
    mode: usize,
    u: f64,
    v: Option<f64>,
}

const PATH_HEADER: [&str; 5] = ["replica", "t", "mode", "u", "v"];

fn path_rows(replica: usize, path: &Path, rows: &mut Vec<PathRow>) {
    for (i, t) in path.grid().times().enumerate() {
        let u = path.position(i);
        let v = path.velocities().map(|v| &v[i]);
        for m in 0..path.modes() {
            rows.push(PathRow {
                replica,
                t,
                mode: m + 1,
                u: u.coeffs()[m],
                v: v.map(|v| v.coeffs()[m]),
            });
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SimulateSummary {
    equation: Equation,
    eps: f64,
    dt: f64,
    t_end: f64,
    replicas: Vec<ReplicaSummary>,
    mean_final_norm: f64,
}

#[derive(Serialize, Deserialize)]
struct ReplicaSummary {
    replica: usize,
    final_norm: f64,
    sup_norm: f64,
}

fn simulate(
    cfg: &SpectralConfig,
    b: &Nonlinearity,
    equation: Equation,
    p: &SimulateParams,
    seed: u64,
    name: &str,
    out: &mut Artifacts,
) -> Step {
    let k = cfg.modes();
    let grid = TimeGrid::covering(p.t_end, p.dt)?;
    let z0 = phase_point(p.u0.as_deref(), p.v0.as_deref(), k)?;
    let paths = (0..p.replicas)
        .into_par_iter()
        .map(|r| {
            let plan = NoisePlan::new(seed, r as u64);
            match equation {
                Equation::Heat => simulate_heat(cfg, &z0.u, p.eps, b, &grid, &plan),
                Equation::Wave { mu } => simulate_wave(cfg, &z0, mu, p.eps, b, &grid, &plan),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    let replicas: Vec<ReplicaSummary> = paths
        .iter()
        .enumerate()
        .map(|(r, path)| {
            path_rows(r, path, &mut rows);
            ReplicaSummary {
                replica: r,
                final_norm: path.last().u.norm(),
                sup_norm: path.sup_position_norm(),
            }
        })
        .collect();
    let mean_final_norm =
        replicas.iter().map(|r| r.final_norm).sum::<f64>() / replicas.len() as f64;
    out.csv("simulate.csv", &PATH_HEADER, &rows)?;
    out.json(
        "simulate.json",
        name,
        &SimulateSummary {
            equation,
            eps: p.eps,
            dt: grid.dt(),
            t_end: p.t_end,
            replicas,
            mean_final_norm,
        },
    )?;
    Ok((("mean_final_norm", mean_final_norm), None))
}

#[derive(Serialize, Deserialize)]
pub struct SkConvergeSummary {
    pub eps: f64,
    pub t_end: f64,
    pub dt: f64,
    pub monotone: bool,
    pub study: SkStudy,
}

fn sk_converge(
    cfg: &SpectralConfig,
    b: &Nonlinearity,
    p: &SkConvergeParams,
    seed: u64,
    name: &str,
    out: &mut Artifacts,
) -> Step {
    let k = cfg.modes();
    let grid = TimeGrid::covering(p.t_end, p.dt)?;
    let u0 = field_or_zero("experiment.u0", p.u0.as_deref(), k)?;
    let v0 = field_or_zero("experiment.v0", p.v0.as_deref(), k)?;
    let study = sk_convergence_study(cfg, &u0, &v0, &p.mu, p.eps, b, &grid, seed, p.replicas)?;
    let rows: Vec<(f64, f64, f64)> = (0..study.mu.len())
        .map(|j| (study.mu[j], study.median[j], study.mean[j]))
        .collect();
    out.csv(
        "sk_converge.csv",
        &["mu", "median_sup_difference", "mean_sup_difference"],
        &rows,
    )?;
    let last = *study.median.last().expect("mass ladder is non-empty");
    out.json(
        "sk_converge.json",
        name,
        &SkConvergeSummary {
            eps: p.eps,
            t_end: p.t_end,
            dt: grid.dt(),
            monotone: study.is_monotone(),
            study,
        },
    )?;
    Ok((("median_sup_difference_at_smallest_mu", last), None))
}

#[derive(Serialize, Deserialize)]
struct ActionSummary {
    equation: Equation,
    report: ActionReport,
}

fn test_path(cfg: &SpectralConfig, spec: &PathSpec) -> Result<Path, CliError> {
    let k = cfg.modes();
    let path = match spec {
        PathSpec::Sine {
            mode,
            amplitude,
            t_end,
            steps,
        } => Path::from_fn(TimeGrid::new(0.0, *t_end, *steps)?, |t| {
            Field::mode(k, mode - 1, amplitude * t.sin())
        })?,
        PathSpec::ReversedFlow {
            target,
            horizon,
            steps,
        } => {
            let x = field("experiment.path.target", target, k)?;
            Path::from_fn(TimeGrid::new(-horizon, 0.0, *steps)?, |t| {
                let c = x
                    .coeffs()
                    .iter()
                    .zip(cfg.eigenvalues())
                    .map(|(xk, a)| xk * (a * t).exp())
                    .collect();
                Field::new(c).expect("finite coefficients")
            })?
        }
        PathSpec::Ramp {
            target,
            horizon,
            steps,
        } => {
            let x = field("experiment.path.target", target, k)?;
            Path::from_fn(TimeGrid::new(-horizon, 0.0, *steps)?, |t| {
                x.scaled(1.0 + t / horizon)
            })?
        }
    };
    Ok(path)
}

fn action(
    cfg: &SpectralConfig,
    b: &Nonlinearity,
    equation: Equation,
    p: &ActionParams,
    name: &str,
    out: &mut Artifacts,
) -> Step {
    let path = test_path(cfg, &p.path)?;
    let report = match equation {
        Equation::Heat => action_heat(cfg, &path, b)?,
        Equation::Wave { mu } => action_wave(cfg, &path, mu, b)?,
    };
    let mut rows = Vec::new();
    path_rows(0, &path, &mut rows);
    out.csv("action_path.csv", &PATH_HEADER, &rows)?;
    out.json("action.json", name, &ActionSummary { equation, report })?;
    Ok((("action", report.value), None))
}

/// The serialised form of a minimum-action result.
#[derive(Serialize, Deserialize)]
struct QuasipotentialSummary {
    mu: Option<f64>,
    action: f64,
    converged: bool,
    iterations: usize,
    horizon_ladder: Vec<(f64, f64)>,
    start: Field,
    terminal_velocity: Field,
}

fn warn_mass(cfg: &SpectralConfig, b: &Nonlinearity, equation: Equation) {
    if let Some(mu) = equation.mass() {
        let h = check_hypotheses(cfg, b, Some(mu));
        if h.mu_below_threshold == Some(false) {
            eprintln!(
                "warning: mass {mu} is above the small-mass threshold {}; the minimiser may not be meaningful",
                h.small_mass_threshold
            );
        }
    }
}

fn quasipotential(
    cfg: &SpectralConfig,
    b: &Nonlinearity,
    equation: Equation,
    p: &QuasipotentialParams,
    name: &str,
    out: &mut Artifacts,
) -> Step {
    let k = cfg.modes();
    let target = field("experiment.target", &p.target, k)?;
    warn_mass(cfg, b, equation);
    let problem = match equation {
        Equation::Heat => MamProblem::heat(cfg, b, target),
        Equation::Wave { mu } => {
            let velocity = match &p.terminal_velocity {
                Some(y) => EndpointVelocity::Fixed(field("experiment.terminal_velocity", y, k)?),
                None => EndpointVelocity::Free,
            };
            MamProblem::wave(cfg, b, mu, target, velocity)
        }
    }
    .with_start(p.start)
    .with_options(p.options);
    let r = mam_minimize(&problem)?;
    let mut rows = Vec::new();
    path_rows(0, &r.path, &mut rows);
    out.csv("quasipotential_path.csv", &PATH_HEADER, &rows)?;
    let summary = QuasipotentialSummary {
        mu: equation.mass(),
        action: r.action,
        converged: r.converged,
        iterations: r.iterations,
        horizon_ladder: r.horizon_ladder.clone(),
        start: r.path.position(0).clone(),
        terminal_velocity: r.terminal_velocity(),
    };
    out.json("quasipotential.json", name, &summary)?;
    let failure = (!r.converged).then(|| {
        CliError::NotConverged(format!(
            "minimum action {} after {} iterations",
            r.action, r.iterations
        ))
    });
    Ok((("action", r.action), failure))
}

fn sk_limit(
    cfg: &SpectralConfig,
    b: &Nonlinearity,
    p: &SkLimitParams,
    name: &str,
    out: &mut Artifacts,
) -> Step {
    let target = field("experiment.target", &p.target, cfg.modes())?;
    for &mu in &p.mu {
        warn_mass(cfg, b, Equation::Wave { mu });
    }
    let t: SkLimitTable = sk_limit_study(cfg, &target, &p.mu, b, p.options)?;
    let rows: Vec<(f64, f64, f64, f64, bool)> = t
        .rows
        .iter()
        .map(|r| (r.mu, r.v_mu, t.v, r.gap, r.converged))
        .collect();
    out.csv(
        "sk_limit.csv",
        &["mu", "v_mu", "v", "gap", "converged"],
        &rows,
    )?;
    out.json("sk_limit.json", name, &t)?;
    let gap = t.rows.last().map_or(0.0, |r| r.gap);
    let failure = (!t.all_converged())
        .then(|| CliError::NotConverged("a minimum-action solve along the mass ladder".into()));
    Ok((("gap_at_smallest_mu", gap), failure))
}

/// One `ε` level of an exit experiment.
#[derive(Serialize, Deserialize)]
pub struct ExitLevel {
    pub eps: f64,
    pub seed: u64,
    /// `None` when too many replicas were censored to summarise.
    pub stats: Option<ExitStats>,
    pub place: Option<ExitPlaceReport>,
}

#[derive(Serialize, Deserialize)]
pub struct ExitSummary {
    pub target: Option<f64>,
    pub levels: Vec<ExitLevel>,
}

#[derive(Serialize)]
struct RecordRow {
    eps: f64,
    replica: usize,
    tau: f64,
    censored: bool,
    mode: usize,
    u: f64,
}

fn exit(
    cfg: &SpectralConfig,
    b: &Nonlinearity,
    equation: Equation,
    p: &ExitParams,
    seed: u64,
    name: &str,
    out: &mut Artifacts,
) -> Step {
    let z0 = phase_point(p.u0.as_deref(), p.v0.as_deref(), cfg.modes())?;
    let problem = ExitProblem::new(cfg.clone(), b.clone(), equation, p.domain, p.dt)
        .with_start(z0)
        .with_max_steps(p.max_steps);
    problem.validate()?;
    let target = p.target.or_else(|| p.domain.boundary_potential(cfg, b));
    let mut rows = Vec::new();
    let mut levels = Vec::new();
    let mut failure = None;
    for (i, &eps) in p.eps.iter().enumerate() {
        let level = level_seed(seed, i);
        let records: Vec<ExitRecord> = run_replicas(&problem, eps, p.replicas, level)?;
        for (r, rec) in records.iter().enumerate() {
            for (m, &u) in rec.exit_point.coeffs().iter().enumerate() {
                rows.push(RecordRow {
                    eps,
                    replica: r,
                    tau: rec.tau,
                    censored: rec.hit_max_steps,
                    mode: m + 1,
                    u,
                });
            }
        }
        let stats = match ExitStats::summarize(eps, &records, target, level) {
            Ok(s) => Some(s),
            Err(skld::Error::Censored { censored, replicas }) => {
                failure.get_or_insert(CliError::Budget(format!(
                    "{censored} of {replicas} replicas at eps = {eps} hit max_steps = {}",
                    p.max_steps
                )));
                None
            }
            Err(e) => return Err(e.into()),
        };
        let place = (!p.caps.is_empty()).then(|| place_report(&problem, eps, &records, &p.caps));
        levels.push(ExitLevel {
            eps,
            seed: level,
            stats,
            place,
        });
    }
    out.csv(
        "exit_records.csv",
        &["eps", "replica", "tau", "censored", "mode", "u"],
        &rows,
    )?;
    let scaling: Vec<_> = levels
        .iter()
        .filter_map(|l| l.stats.as_ref())
        .map(|s| {
            (
                s.eps,
                s.eps_log_mean,
                s.ci_low,
                s.ci_high,
                s.target,
                s.mean_tau,
                s.censored,
            )
        })
        .collect();
    out.csv(
        "exit_scaling.csv",
        &[
            "eps",
            "eps_log_mean_tau",
            "ci_low",
            "ci_high",
            "target",
            "mean_tau",
            "censored",
        ],
        &scaling,
    )?;
    let metric = scaling.last().map_or(f64::NAN, |s| s.1);
    out.json("exit.json", name, &ExitSummary { target, levels })?;
    Ok((("eps_log_mean_tau_at_smallest_eps", metric), failure))
}
