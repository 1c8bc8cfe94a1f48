//! Shape reconstruction of 2-D scatterers from multi-source, multi-frequency
//! scattered-field data.
//!
//! The contrast sources of all illuminations are recovered jointly under a
//! row-sparsity (sum-of-norms) prior with a spectral projected-gradient
//! solver, and iterations are stopped by cross validation on withheld
//! receivers. A finite-difference frequency-domain solver produces synthetic
//! data, and the linear sampling method is provided as a baseline.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod dataio;
pub mod dataset;
pub mod error;
pub mod fdfd;
pub mod green;
pub mod imaging;
pub mod lsm;
pub mod model;
pub mod pipeline;
pub mod sensing;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
pub use faer::c64;
