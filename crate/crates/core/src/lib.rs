//! MPFA and fitted-MPFA finite-volume solvers for the two-asset Black-Scholes PDE,
//! priced against the closed-form rainbow max-call.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analytic;
pub mod cli;
pub mod error;
pub mod error_metrics;
pub mod fitted;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod mpfa;
pub mod timestepper;
pub mod upwind;

pub use error::{Error, Result};
pub use grid::{Axis1D, TensorGrid};
pub use linalg::{BoundaryVector, SparseOperator};
pub use model::{ModelParams, PdeCoefficients, Tensor2};
