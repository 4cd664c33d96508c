//! Regularized moving-mass Gao beam: mollified and truncated approximate
//! problems, Picard fixed-point solves, energy bookkeeping, weak-form
//! residuals and `ε → 0` convergence diagnostics on a uniform grid.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod fixed_point;
pub mod kernels;
pub mod linear_solver;
pub mod model;

pub use error::{Error, Result};
