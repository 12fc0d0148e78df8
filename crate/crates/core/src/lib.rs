//! Spectral-Galerkin toolkit for the damped stochastic wave equation
//! `μ u'' + u' = Δu + B(u) + √ε Q Ẇ` on `(0, L)` with Dirichlet conditions,
//! and its small-mass limit, the stochastic heat equation.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod action;
pub mod dynamics;
pub mod error;
pub mod exit;
pub mod noise;
pub mod quadrature;
pub mod quasipotential;
pub mod spectral;

pub use error::{Error, Result};
pub use noise::{NoiseCursor, NoisePlan};
pub use spectral::{Field, Nonlinearity, PhasePoint, SpectralConfig};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/spectral.md")]
    mod spectral {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/action.md")]
    mod action {}
    #[doc = include_str!("../../../book/src/quasipotential.md")]
    mod quasipotential {}
    #[doc = include_str!("../../../book/src/exit.md")]
    mod exit {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
