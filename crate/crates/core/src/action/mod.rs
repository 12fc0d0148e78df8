//! Action functionals of the wave and heat systems on discrete paths,
//! minimum control energies of the linear system and the mollifier.

mod functional;
mod linear;
mod mollifier;
pub(crate) mod stencil;

pub use functional::{action_heat, action_wave, control_from_path, ActionReport};
pub use linear::{linear_min_energy_finite, linear_min_energy_infinite};
pub use mollifier::{mollify, second_derivative_ratio, Mollified, MollifierSpec};
