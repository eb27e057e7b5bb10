//! Numerical laboratory for the sharp Hardy–Littlewood–Sobolev and Sobolev
//! inequalities on the sphere: spectral operators, deficits, projection onto
//! the extremizer manifold, local-stability certificates, competing-symmetry
//! flows and the Legendre duality between the two inequalities.

// `!(x > 0.0)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod constants;
pub mod duality;
pub mod error;
pub mod extremizers;
pub mod flows;
pub mod local_stability;
pub mod profile;
pub mod quadrature;
pub mod scalar;
pub mod sphere;

pub use error::{Error, Result};

/// Version string embedded in every report.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
