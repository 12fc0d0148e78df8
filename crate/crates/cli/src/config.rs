use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use skld::exit::{Cap, ExitDomain, DEFAULT_MAX_STEPS};
use skld::quasipotential::{MamOptions, Start};
use skld::{Field, Nonlinearity, PhasePoint, SpectralConfig};

use crate::error::CliError;

/// One experiment, fully described by a single JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spectral: SpectralBlock,
    #[serde(default)]
    pub nonlinearity: NonlinearityBlock,
    #[serde(default)]
    pub equation: EquationBlock,
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralBlock {
    pub domain_length: f64,
    pub modes: usize,
    pub beta: f64,
    pub noise_scale: f64,
    pub space_dim: usize,
}

impl Default for SpectralBlock {
    fn default() -> Self {
        Self {
            domain_length: PI,
            modes: 8,
            beta: 0.0,
            noise_scale: 1.0,
            space_dim: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearityBlock {
    #[default]
    Zero,
    /// `B(x) = -κ ∘ x`; a single rate applies to every mode.
    Linear {
        rates: Vec<f64>,
    },
    Sine {
        amplitude: f64,
    },
    Tanh {
        amplitude: f64,
    },
    Sum {
        terms: Vec<NonlinearityBlock>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EquationBlock {
    #[default]
    Heat,
    Wave {
        mu: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: PathBuf,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("results"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    Simulate(SimulateParams),
    SkConverge(SkConvergeParams),
    Action(ActionParams),
    Quasipotential(QuasipotentialParams),
    SkLimit(SkLimitParams),
    Exit(ExitParams),
    Verify(VerifyParams),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Simulate(_) => "simulate",
            Experiment::SkConverge(_) => "sk-converge",
            Experiment::Action(_) => "action",
            Experiment::Quasipotential(_) => "quasipotential",
            Experiment::SkLimit(_) => "sk-limit",
            Experiment::Exit(_) => "exit",
            Experiment::Verify(_) => "verify",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    pub eps: f64,
    pub t_end: f64,
    pub dt: f64,
    /// Initial position; zero when omitted.
    #[serde(default)]
    pub u0: Option<Vec<f64>>,
    /// Initial velocity of the wave equation; zero when omitted.
    #[serde(default)]
    pub v0: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub replicas: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkConvergeParams {
    pub eps: f64,
    pub t_end: f64,
    pub dt: f64,
    pub mu: Vec<f64>,
    pub replicas: usize,
    pub u0: Option<Vec<f64>>,
    pub v0: Option<Vec<f64>>,
}

impl Default for SkConvergeParams {
    fn default() -> Self {
        Self {
            eps: 0.1,
            t_end: 1.0,
            dt: 1e-3,
            mu: vec![1e-1, 1e-2, 1e-3],
            replicas: 100,
            u0: None,
            v0: None,
        }
    }
}

/// A test path on which the action is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathSpec {
    /// `amplitude · sin(t) e_mode` on `[0, t_end]`, `mode` counted from 1.
    Sine {
        mode: usize,
        amplitude: f64,
        t_end: f64,
        steps: usize,
    },
    /// The reversed linear flow `x_k e^{α_k t}` on `[-horizon, 0]`.
    ReversedFlow {
        target: Vec<f64>,
        horizon: f64,
        steps: usize,
    },
    /// Straight line from `0` to `target` on `[-horizon, 0]`.
    Ramp {
        target: Vec<f64>,
        horizon: f64,
        steps: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionParams {
    pub path: PathSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuasipotentialParams {
    pub target: Vec<f64>,
    /// Terminal velocity of a wave problem; optimised when omitted.
    #[serde(default)]
    pub terminal_velocity: Option<Vec<f64>>,
    #[serde(default = "origin")]
    pub start: Start,
    #[serde(default)]
    pub options: MamOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkLimitParams {
    pub target: Vec<f64>,
    pub mu: Vec<f64>,
    #[serde(default)]
    pub options: MamOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExitParams {
    pub domain: ExitDomain,
    pub eps: Vec<f64>,
    pub replicas: usize,
    pub dt: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    /// Start position; the origin when omitted.
    #[serde(default)]
    pub u0: Option<Vec<f64>>,
    #[serde(default)]
    pub v0: Option<Vec<f64>>,
    /// Overrides the closed-form `inf_{∂G} V`.
    #[serde(default)]
    pub target: Option<f64>,
    /// Boundary caps whose hit frequencies are reported at every level.
    #[serde(default)]
    pub caps: Vec<Cap>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyParams {}

fn one() -> usize {
    1
}

fn origin() -> Start {
    Start::Origin
}

fn default_max_steps() -> u64 {
    DEFAULT_MAX_STEPS
}

impl ExperimentConfig {
    /// Parses and validates a JSON document. Parse errors carry the path of
    /// the offending field, e.g. `spectral.modes`.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| CliError::Config {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The default nonlinear configuration: eight white-noise modes on
    /// `(0, π)` with `B = 0.5 sin u`.
    pub fn default_with(experiment: Experiment) -> Self {
        Self {
            spectral: SpectralBlock::default(),
            nonlinearity: NonlinearityBlock::Sine { amplitude: 0.5 },
            equation: EquationBlock::Heat,
            experiment,
            seed: 0,
            output: OutputBlock::default(),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = self.spectral()?;
        self.nonlinearity(&cfg)?;
        self.equation()?;
        let k = cfg.modes();
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(CliError::field(name, "must be a positive real"))
            }
        };
        let non_negative = |name: &str, x: f64| {
            if x.is_finite() && x >= 0.0 {
                Ok(())
            } else {
                Err(CliError::field(name, "must be a non-negative real"))
            }
        };
        let count = |name: &str, n: usize| {
            if n > 0 {
                Ok(())
            } else {
                Err(CliError::field(name, "must be at least 1"))
            }
        };
        let masses = |name: &str, mu: &[f64]| {
            if mu.is_empty() {
                return Err(CliError::field(name, "must list at least one mass"));
            }
            mu.iter().try_for_each(|&m| positive(name, m))
        };
        match &self.experiment {
            Experiment::Simulate(p) => {
                non_negative("experiment.eps", p.eps)?;
                positive("experiment.t_end", p.t_end)?;
                positive("experiment.dt", p.dt)?;
                count("experiment.replicas", p.replicas)?;
                field_or_zero("experiment.u0", p.u0.as_deref(), k)?;
                field_or_zero("experiment.v0", p.v0.as_deref(), k)?;
            }
            Experiment::SkConverge(p) => {
                non_negative("experiment.eps", p.eps)?;
                positive("experiment.t_end", p.t_end)?;
                positive("experiment.dt", p.dt)?;
                masses("experiment.mu", &p.mu)?;
                count("experiment.replicas", p.replicas)?;
                field_or_zero("experiment.u0", p.u0.as_deref(), k)?;
                field_or_zero("experiment.v0", p.v0.as_deref(), k)?;
            }
            Experiment::Action(p) => match &p.path {
                PathSpec::Sine {
                    mode, t_end, steps, ..
                } => {
                    if *mode == 0 || *mode > k {
                        return Err(CliError::field(
                            "experiment.path.mode",
                            format!("must lie in 1..={k}"),
                        ));
                    }
                    positive("experiment.path.t_end", *t_end)?;
                    count("experiment.path.steps", *steps)?;
                }
                PathSpec::ReversedFlow {
                    target,
                    horizon,
                    steps,
                }
                | PathSpec::Ramp {
                    target,
                    horizon,
                    steps,
                } => {
                    field("experiment.path.target", target, k)?;
                    positive("experiment.path.horizon", *horizon)?;
                    count("experiment.path.steps", *steps)?;
                }
            },
            Experiment::Quasipotential(p) => {
                field("experiment.target", &p.target, k)?;
                if let Some(y) = &p.terminal_velocity {
                    if self.equation == EquationBlock::Heat {
                        return Err(CliError::field(
                            "experiment.terminal_velocity",
                            "only applies to the wave equation",
                        ));
                    }
                    field("experiment.terminal_velocity", y, k)?;
                }
                if let Start::Ball { radius } = p.start {
                    positive("experiment.start.radius", radius)?;
                }
            }
            Experiment::SkLimit(p) => {
                field("experiment.target", &p.target, k)?;
                masses("experiment.mu", &p.mu)?;
            }
            Experiment::Exit(p) => {
                if p.eps.is_empty() {
                    return Err(CliError::field(
                        "experiment.eps",
                        "must list at least one noise strength",
                    ));
                }
                p.eps
                    .iter()
                    .try_for_each(|&e| positive("experiment.eps", e))?;
                count("experiment.replicas", p.replicas)?;
                positive("experiment.dt", p.dt)?;
                if p.max_steps == 0 {
                    return Err(CliError::field(
                        "experiment.max_steps",
                        "must be at least 1",
                    ));
                }
                p.domain
                    .validate(k)
                    .map_err(|e| CliError::field("experiment.domain", e.to_string()))?;
                field_or_zero("experiment.u0", p.u0.as_deref(), k)?;
                field_or_zero("experiment.v0", p.v0.as_deref(), k)?;
                if let Some(t) = p.target {
                    non_negative("experiment.target", t)?;
                }
                for c in &p.caps {
                    if c.mode >= k {
                        return Err(CliError::field(
                            "experiment.caps.mode",
                            format!("must lie in 0..{k}"),
                        ));
                    }
                    if !(c.threshold.is_finite() && c.threshold.abs() <= 1.0) {
                        return Err(CliError::field(
                            "experiment.caps.threshold",
                            "must lie in [-1, 1]",
                        ));
                    }
                }
            }
            Experiment::Verify(_) => {}
        }
        Ok(())
    }

    pub fn spectral(&self) -> Result<SpectralConfig, CliError> {
        let s = &self.spectral;
        SpectralConfig::new(s.domain_length, s.modes, s.beta, s.noise_scale, s.space_dim)
            .map_err(|e| prefixed("spectral", e))
    }

    pub fn nonlinearity(&self, cfg: &SpectralConfig) -> Result<Nonlinearity, CliError> {
        build_nonlinearity(&self.nonlinearity, cfg, "nonlinearity")
    }

    pub fn equation(&self) -> Result<skld::dynamics::Equation, CliError> {
        match self.equation {
            EquationBlock::Heat => Ok(skld::dynamics::Equation::Heat),
            EquationBlock::Wave { mu } if mu.is_finite() && mu > 0.0 => {
                Ok(skld::dynamics::Equation::Wave { mu })
            }
            EquationBlock::Wave { .. } => {
                Err(CliError::field("equation.mu", "must be a positive real"))
            }
        }
    }

    /// SHA-256 of the canonical JSON form (keys sorted, no whitespace), so
    /// formatting changes do not alter the hash.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serialises");
        let bytes = serde_json::to_vec(&value).expect("value serialises");
        format!("{:x}", Sha256::digest(bytes))
    }
}

fn build_nonlinearity(
    block: &NonlinearityBlock,
    cfg: &SpectralConfig,
    at: &str,
) -> Result<Nonlinearity, CliError> {
    let b = match block {
        NonlinearityBlock::Zero => Nonlinearity::Zero,
        NonlinearityBlock::Linear { rates } => {
            if rates.len() != 1 && rates.len() != cfg.modes() {
                return Err(CliError::field(
                    &format!("{at}.rates"),
                    format!("needs 1 or {} entries, got {}", cfg.modes(), rates.len()),
                ));
            }
            if rates.iter().any(|r| !r.is_finite()) {
                return Err(CliError::field(&format!("{at}.rates"), "must be finite"));
            }
            Nonlinearity::linear_per_mode(rates.clone())
        }
        NonlinearityBlock::Sine { amplitude } => {
            Nonlinearity::sine(cfg, *amplitude).map_err(|e| prefixed(at, e))?
        }
        NonlinearityBlock::Tanh { amplitude } => {
            Nonlinearity::tanh(cfg, *amplitude).map_err(|e| prefixed(at, e))?
        }
        NonlinearityBlock::Sum { terms } => Nonlinearity::Sum(
            terms
                .iter()
                .enumerate()
                .map(|(i, t)| build_nonlinearity(t, cfg, &format!("{at}.terms[{i}]")))
                .collect::<Result<_, _>>()?,
        ),
    };
    Ok(b)
}

fn prefixed(at: &str, e: skld::Error) -> CliError {
    match e {
        skld::Error::InvalidParameter { name, reason } => {
            CliError::field(&format!("{at}.{name}"), reason)
        }
        other => CliError::field(at, other.to_string()),
    }
}

pub fn field(name: &str, coeffs: &[f64], modes: usize) -> Result<Field, CliError> {
    if coeffs.len() != modes {
        return Err(CliError::field(
            name,
            format!("needs {modes} coefficients, got {}", coeffs.len()),
        ));
    }
    Field::new(coeffs.to_vec()).map_err(|e| CliError::field(name, e.to_string()))
}

pub fn field_or_zero(name: &str, coeffs: Option<&[f64]>, modes: usize) -> Result<Field, CliError> {
    coeffs.map_or(Ok(Field::zeros(modes)), |c| field(name, c, modes))
}

pub fn phase_point(
    u0: Option<&[f64]>,
    v0: Option<&[f64]>,
    modes: usize,
) -> Result<PhasePoint, CliError> {
    let u = field_or_zero("experiment.u0", u0, modes)?;
    let v = field_or_zero("experiment.v0", v0, modes)?;
    PhasePoint::new(u, v).map_err(|e| CliError::field("experiment.v0", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const QP: &str = r#"{
        "spectral": {"modes": 4},
        "experiment": {"kind": "quasipotential", "target": [1, 0, 0, 0]}
    }"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = ExperimentConfig::from_json(QP).unwrap();
        assert_eq!(c.spectral.modes, 4);
        assert_eq!(c.nonlinearity, NonlinearityBlock::Zero);
        assert_eq!(c.output.dir, PathBuf::from("results"));
        assert_eq!(c.experiment.name(), "quasipotential");
    }

    #[test]
    fn negative_modes_name_the_field() {
        let err =
            ExperimentConfig::from_json(&QP.replace("\"modes\": 4", "\"modes\": -3")).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("spectral.modes"), "{err}");
    }

    #[test]
    fn zero_modes_name_the_field() {
        let err =
            ExperimentConfig::from_json(&QP.replace("\"modes\": 4", "\"modes\": 0")).unwrap_err();
        assert!(err.to_string().contains("spectral.modes"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err =
            ExperimentConfig::from_json(&QP.replace("\"modes\": 4", "\"modes\": 4, \"colour\": 1"))
                .unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
        let err =
            ExperimentConfig::from_json(&QP.replace("\"target\"", "\"horizon\": 3, \"target\""))
                .unwrap_err();
        assert!(err.to_string().contains("horizon"), "{err}");
    }

    #[test]
    fn wrong_target_length_names_the_field() {
        let err = ExperimentConfig::from_json(&QP.replace("[1, 0, 0, 0]", "[1, 0]")).unwrap_err();
        assert!(err.to_string().contains("experiment.target"), "{err}");
    }

    #[test]
    fn hash_ignores_formatting() {
        let a = ExperimentConfig::from_json(QP).unwrap();
        let b = ExperimentConfig::from_json(&QP.replace(['\n', ' '], "")).unwrap();
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.seed = 1;
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
