//! Estimators with quadratic loss `Σ_m ([D a]_m − y_m)²` (no ½ factor).
//!
//! - [`solve_ridge`]: `‖G a − y‖² + λ aᵀ G a`, the RKHS problem.
//! - [`solve_lasso`]: `‖D a − y‖² + λ ‖a‖₁`, the generalized LASSO on any
//!   design, solved by accelerated proximal gradient with a KKT certificate.
//! - [`solve_mkl`]: joint kernel-weight / coefficient fit with an `η‖μ‖²`
//!   penalty on the weights.
//! - [`refit_on_support`] and [`debias`]: unpenalized least squares on the
//!   selected columns, used for sparsity counts and coefficient reports.

mod lasso;
mod mkl;
mod refit;
mod ridge;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use lasso::{kkt_residual_lasso, lasso_objective, lipschitz_constant, solve_lasso, solve_lasso_from};
pub use mkl::{mkl_objective, solve_mkl, MklConfig, MklResult};
pub use refit::{debias, reduce_to_independent_support, refit_on_support, Debiased};
pub use ridge::{ridge_objective, solve_ridge};

/// Relative activity threshold: a coefficient counts as active when
/// `|a_j| > ACTIVITY_THRESHOLD · ‖a‖∞`.
pub const ACTIVITY_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `1/L` with `L = 2 σ_max(D)²` from power iteration, inflated by 1%.
    #[default]
    FixedFromPowerIteration,
    /// Doubling `L` until the quadratic upper bound holds.
    Backtracking,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub lambda: f64,
    pub max_iters: usize,
    pub tol_rel_obj: f64,
    pub tol_kkt: f64,
    pub step_rule: StepRule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            max_iters: 20_000,
            tol_rel_obj: 1e-10,
            tol_kkt: 1e-8,
            step_rule: StepRule::default(),
        }
    }
}

impl SolverConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidConfig(format!("lambda must be ≥ 0, got {}", self.lambda)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.tol_rel_obj > 0.0 && self.tol_kkt > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SolverResult {
    /// Flat coefficients in design-column order.
    pub coeffs: DVector<f64>,
    /// Objective after every iteration, starting with the initial point.
    pub objective_trace: Vec<f64>,
    pub kkt_residual: f64,
    /// Flat column indices with `|a_j| > ACTIVITY_THRESHOLD · ‖a‖∞`.
    pub active_set: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
}

impl SolverResult {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the initial objective")
    }

    /// Turns a non-converged result into [`Error::NotConverged`].
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
            })
        }
    }
}

/// Column indices with `|a_j| > ACTIVITY_THRESHOLD · ‖a‖∞`.
pub fn active_set(coeffs: &DVector<f64>) -> Vec<usize> {
    let cutoff = ACTIVITY_THRESHOLD * coeffs.amax();
    (0..coeffs.len()).filter(|&j| coeffs[j] != 0.0 && coeffs[j].abs() > cutoff).collect()
}
