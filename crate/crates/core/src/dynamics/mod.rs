//! Time integration of the stochastic heat and wave systems, the noiseless
//! flow and the controlled skeleton equations.

mod grid;
mod integrator;
mod sk;
mod skeleton;

pub use grid::{Control, Path, TimeGrid};
pub use integrator::{
    simulate_heat, simulate_wave, unperturbed_flow, Equation, Integrator, DIVERGENCE_BOUND,
};
pub use sk::{coupled_sk_run, sk_convergence_study, SkRow, SkStudy};
pub use skeleton::{skeleton_solve_heat, skeleton_solve_wave};

pub(crate) use integrator::guard;
pub(crate) use sk::median;
