//! Truncated sine basis, Sobolev norms, the operators `A`, `Q`, `B` and the
//! per-mode semigroups of both equations.

mod config;
mod field;
pub mod nonlinearity;
mod potential;
mod propagator;

pub use config::SpectralConfig;
pub use field::{Field, PhasePoint};
pub use nonlinearity::{Collocation, Nemytskii, Nonlinearity, PointwiseFn};
pub use potential::{CertifiedPotential, GradientPotential};
pub(crate) use propagator::check_mass;
pub use propagator::{
    check_hypotheses, decay_fit, energy_operator_norm, heat_propagate, mode_step, wave_propagate,
    Damping, DecayFit, ForcingResponse, HypothesisReport, ModePropagator, ModeStep, StepNoise,
    CRITICAL_TOLERANCE,
};
