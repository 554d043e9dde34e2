//! Equilibrium computations for an economy whose firms forecast prices with
//! local polynomial expansions of demand.
//!
//! The crate is `no_std` (it needs `alloc`). Every routine is a pure function
//! of its arguments.
//!
//! - [`demand`]: parametric demand families and their derivatives.
//! - [`ree`]: the rational-expectations fixed point and its multiplier.
//! - [`polyeq`]: static polynomial equilibria (first order, parameter
//!   changes, second order, max-error discounting).
//! - [`learning`]: nearest-point learning dynamics and mixture equilibria.
//! - [`asyminfo`]: dispersed-information aggregate equilibria.
//! - [`oracle`]: grid-scan root enumeration, finite differences and residuals
//!   of every defining equation.
#![no_std]
#![deny(unsafe_code)]
// `!(x > 0.0)` style checks reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod asyminfo;
pub mod demand;
mod error;
pub mod learning;
pub mod oracle;
pub mod polyeq;
pub mod quadrature;
pub mod ree;

pub use error::{Error, Result};

/// Deviations at or below this magnitude are treated as zero when labelling
/// equilibria and filtering sign branches.
pub const ZERO_BAND: f64 = 1e-12;

/// Largest admissible residual of a defining equation at a reported root.
pub const RESIDUAL_TOL: f64 = 1e-10;
