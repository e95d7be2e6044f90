//! Sparse multiple-kernel regression with generalized total-variation
//! (ℓ1) regularization.
//!
//! The crate is organized bottom-up:
//!
//! - [`kernels`]: admissible shift-invariant kernel families, their Fourier
//!   responses, Green's-function tables and a numerical admissibility check.
//! - [`dictionary`]: training sets, center grids and design/Gram assembly.
//! - [`solvers`]: ridge (RKHS), generalized LASSO, multiple-kernel learning
//!   and the support refit used for sparsity reporting.
//! - [`multigrid`]: coarse-to-fine refinement of kernel centers.
//! - [`experiments`]: synthetic tasks, cross-validation and the five-way
//!   estimator comparison.
//! - [`cli`]: configuration parsing and the `sparse-mkr` commands.

pub mod cli;
pub mod dictionary;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod multigrid;
pub mod quad;
pub mod solvers;

pub use error::{Error, Result};
