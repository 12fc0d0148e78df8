//! Quasi-potentials by minimum action, the closed form of the gradient
//! case and the small-mass studies built on them.

mod banded;
mod mam;
mod studies;

pub use mam::{mam_minimize, EndpointVelocity, MamOptions, MamProblem, MamResult, Start};
pub use studies::{
    regularized_control_experiment, sk_limit_study, v_exact_gradient, v_heat, v_mu, RegularizedRow,
    RegularizedTable, SkLimitRow, SkLimitTable,
};
