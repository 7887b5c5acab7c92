//! LinUCB on the unit ball: exact action selection, incremental tracking of
//! the design covariance spectrum, asymptotic confidence sets, and Monte
//! Carlo checks of the predicted spectral and distributional behavior.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod eigen;
pub mod engine;
pub mod error;
pub mod harness;
pub mod inference;

pub use error::{Error, Result};
