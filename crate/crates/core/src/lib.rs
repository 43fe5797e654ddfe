//! Thermodynamic Cucker-Smale particles in a harmonic potential: model,
//! integration, fluctuation diagnostics and decay analysis.

// Comparisons are written so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod integrator;
pub mod model;
pub mod numeric;

pub use error::{Result, TcsError};
