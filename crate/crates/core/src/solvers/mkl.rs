//! Multiple kernel learning by block coordinate descent.
//!
//! The joint objective `‖G_μ a − y‖² + λ aᵀG_μ a + η‖μ‖²` with
//! `G_μ = Σ μ_n G_n` is minimized over `a` by a ridge solve and over
//! `μ ≥ 0` by an exact active-set solve. For fixed `a` the μ-block is
//! the strictly convex quadratic `‖Bμ − y‖² + cᵀμ + η‖μ‖²` with
//! `B = [G_1 a, …, G_N a]` and `c_n = λ aᵀG_n a`. The joint problem is not
//! convex, so the best iterate is returned with no global guarantee.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::solve_ridge;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MklConfig {
    pub max_iters: usize,
    pub tol_rel_obj: f64,
    /// Cap on active-set changes per μ-update.
    pub inner_max_iters: usize,
}

impl Default for MklConfig {
    fn default() -> Self {
        Self {
            max_iters: 2_000,
            tol_rel_obj: 1e-12,
            inner_max_iters: 200,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MklResult {
    pub mu: DVector<f64>,
    pub coeffs: DVector<f64>,
    pub objective: f64,
    /// Active-set changes summed over all μ-updates.
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
}

fn combine(grams: &[DMatrix<f64>], mu: &DVector<f64>) -> DMatrix<f64> {
    let m = grams[0].nrows();
    let mut g = DMatrix::zeros(m, m);
    for (gn, &w) in grams.iter().zip(mu.iter()) {
        if w != 0.0 {
            g += gn * w;
        }
    }
    g
}

/// `‖G_μ a − y‖² + λ aᵀG_μ a + η‖μ‖²`.
pub fn mkl_objective(
    grams: &[DMatrix<f64>],
    targets: &DVector<f64>,
    lambda: f64,
    eta: f64,
    mu: &DVector<f64>,
    a: &DVector<f64>,
) -> f64 {
    let ga = combine(grams, mu) * a;
    (&ga - targets).norm_squared() + lambda * a.dot(&ga) + eta * mu.norm_squared()
}

/// Minimizes `‖Bμ − y‖² + cᵀμ + η‖μ‖²` over `μ ≥ 0` with a primal
/// active-set method. Returns the minimizer and the number of active-set
/// changes.
fn weight_step(
    b: &DMatrix<f64>,
    c: &DVector<f64>,
    targets: &DVector<f64>,
    eta: f64,
    config: &MklConfig,
) -> (DVector<f64>, usize) {
    let n = c.len();
    let h = b.tr_mul(b) * 2.0 + DMatrix::identity(n, n) * (2.0 * eta);
    let lin = c - b.tr_mul(targets) * 2.0;
    let scale = lin.amax() + h.amax();
    let tol = 1e-14 * scale.max(f64::MIN_POSITIVE);
    let mut mu = DVector::zeros(n);
    let mut free = vec![false; n];
    let mut changes = 0;

    let solve_free = |free: &[bool]| -> Option<DVector<f64>> {
        let idx: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
        let k = idx.len();
        let hff = DMatrix::from_fn(k, k, |r, s| h[(idx[r], idx[s])]);
        let rhs = DVector::from_fn(k, |r, _| -lin[idx[r]]);
        let sol = match hff.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => hff.svd(true, true).solve(&rhs, 1e-12 * scale).ok()?,
        };
        let mut z = DVector::zeros(n);
        for (r, &i) in idx.iter().enumerate() {
            z[i] = sol[r];
        }
        Some(z)
    };

    while changes < config.inner_max_iters {
        let grad = &h * &mu + &lin;
        let entering = (0..n)
            .filter(|&i| !free[i] && grad[i] < -tol)
            .min_by(|&i, &j| grad[i].total_cmp(&grad[j]));
        let Some(enter) = entering else { break };
        free[enter] = true;
        changes += 1;
        loop {
            let Some(z) = solve_free(&free) else {
                return (mu, changes);
            };
            if z[enter] <= 0.0 && mu[enter] == 0.0 {
                // no descent along the entering coordinate
                free[enter] = false;
                return (mu, changes);
            }
            if (0..n).all(|i| !free[i] || z[i] > 0.0) {
                mu = z;
                break;
            }
            let mut alpha = 1.0_f64;
            for i in (0..n).filter(|&i| free[i] && z[i] <= 0.0) {
                alpha = alpha.min(mu[i] / (mu[i] - z[i]));
            }
            mu = &mu + (&z - &mu) * alpha;
            for i in 0..n {
                if free[i] && mu[i] <= tol * 1e-2 {
                    mu[i] = 0.0;
                    free[i] = false;
                }
            }
            changes += 1;
        }
    }
    (mu, changes)
}

/// Alternates ridge solves in `a` with projected-gradient updates of
/// `μ ≥ 0`, starting from `μ = 1/N`. `eta` weights `‖μ‖²`.
pub fn solve_mkl(
    grams: &[DMatrix<f64>],
    targets: &DVector<f64>,
    lambda: f64,
    eta: f64,
    config: &MklConfig,
) -> Result<MklResult> {
    let n = grams.len();
    if n == 0 {
        return Err(Error::InvalidConfig("MKL needs at least one Gram matrix".into()));
    }
    let m = targets.len();
    if let Some(g) = grams.iter().find(|g| g.nrows() != m || g.ncols() != m) {
        return Err(Error::DimensionMismatch(format!(
            "Gram matrix is {}×{} for {m} targets",
            g.nrows(),
            g.ncols()
        )));
    }
    if !(lambda.is_finite() && lambda >= 0.0 && eta.is_finite() && eta >= 0.0) {
        return Err(Error::InvalidConfig("lambda and eta must be finite and ≥ 0".into()));
    }
    if config.max_iters == 0 || config.inner_max_iters == 0 || !(config.tol_rel_obj > 0.0) {
        return Err(Error::InvalidConfig("MKL iteration limits and tolerance must be positive".into()));
    }

    let mut mu = DVector::from_element(n, 1.0 / n as f64);
    let mut a = solve_ridge(&combine(grams, &mu), targets, lambda)?;
    let mut objective = mkl_objective(grams, targets, lambda, eta, &mu, &a);
    let mut best = (mu.clone(), a.clone(), objective);
    let mut trace = vec![objective];
    let mut inner_iterations = 0;
    let mut converged = false;
    let mut outer = 0;

    for it in 1..=config.max_iters {
        outer = it;
        let columns: Vec<DVector<f64>> = grams.iter().map(|g| g * &a).collect();
        let b = DMatrix::from_columns(&columns);
        let c = DVector::from_iterator(n, columns.iter().map(|ga| lambda * a.dot(ga)));
        let (next_mu, steps) = weight_step(&b, &c, targets, eta, config);
        inner_iterations += steps;
        mu = next_mu;
        a = solve_ridge(&combine(grams, &mu), targets, lambda)?;
        let next = mkl_objective(grams, targets, lambda, eta, &mu, &a);
        trace.push(next);
        if next < best.2 {
            best = (mu.clone(), a.clone(), next);
        }
        let rel = (objective - next).abs() / objective.abs().max(f64::MIN_POSITIVE);
        objective = next;
        if rel < config.tol_rel_obj || next == 0.0 {
            converged = true;
            break;
        }
    }

    let (mu, coeffs, objective) = best;
    Ok(MklResult {
        mu,
        coeffs,
        objective,
        inner_iterations,
        outer_iterations: outer,
        converged,
        objective_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gram(points: &[f64], width: f64) -> DMatrix<f64> {
        let m = points.len();
        DMatrix::from_fn(m, m, |i, j| (-((points[i] - points[j]) / width).powi(2)).exp())
    }

    #[test]
    fn zero_targets_give_zero_weights() {
        let pts = [0.0, 0.4, 1.1];
        let grams = vec![gram(&pts, 0.5), gram(&pts, 1.0)];
        let r = solve_mkl(&grams, &DVector::zeros(3), 0.1, 1e-3, &MklConfig::default()).unwrap();
        assert_eq!(r.coeffs.amax(), 0.0);
        assert_eq!(r.mu.amax(), 0.0);
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn weights_stay_nonnegative_and_trace_decreases() {
        let pts = [0.0, 0.3, 0.5, 0.9, 1.4];
        let grams = vec![gram(&pts, 0.2), gram(&pts, 0.6), gram(&pts, 2.0)];
        let y = DVector::from_vec(vec![0.0, 1.0, 0.4, -0.3, 0.8]);
        let r = solve_mkl(&grams, &y, 0.05, 1e-3, &MklConfig::default()).unwrap();
        assert!(r.mu.iter().all(|&v| v >= 0.0));
        assert!(r.objective.is_finite());
        for w in r.objective_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-10) + 1e-14);
        }
    }

    /// Best feasible stationary point over every choice of free set.
    fn enumerate_qp(b: &DMatrix<f64>, c: &DVector<f64>, y: &DVector<f64>, eta: f64) -> f64 {
        let n = c.len();
        let h = b.tr_mul(b) * 2.0 + DMatrix::identity(n, n) * (2.0 * eta);
        let lin = c - b.tr_mul(y) * 2.0;
        let q = |mu: &DVector<f64>| 0.5 * mu.dot(&(&h * mu)) + lin.dot(mu);
        let mut best = 0.0_f64;
        for mask in 1u32..(1 << n) {
            let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let k = idx.len();
            let hff = DMatrix::from_fn(k, k, |r, s| h[(idx[r], idx[s])]);
            let rhs = DVector::from_fn(k, |r, _| -lin[idx[r]]);
            let Some(sol) = hff.lu().solve(&rhs) else { continue };
            if sol.iter().all(|&v| v >= 0.0) {
                let mut mu = DVector::zeros(n);
                for (r, &i) in idx.iter().enumerate() {
                    mu[i] = sol[r];
                }
                best = best.min(q(&mu));
            }
        }
        best
    }

    #[test]
    fn weight_step_matches_enumeration() {
        let mut state = 7u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for trial in 0..40 {
            let (m, n) = (6, 2 + trial % 4);
            let b = DMatrix::from_fn(m, n, |_, _| next());
            let c = DVector::from_fn(n, |_, _| next().abs());
            let y = DVector::from_fn(m, |_, _| next());
            let eta = 1e-3;
            let (mu, _) = weight_step(&b, &c, &y, eta, &MklConfig::default());
            assert!(mu.iter().all(|&v| v >= 0.0));
            let h = b.tr_mul(&b) * 2.0 + DMatrix::identity(n, n) * (2.0 * eta);
            let lin = &c - b.tr_mul(&y) * 2.0;
            let got = 0.5 * mu.dot(&(&h * &mu)) + lin.dot(&mu);
            let want = enumerate_qp(&b, &c, &y, eta);
            assert!((got - want).abs() <= 1e-10 * (1.0 + want.abs()), "{got} vs {want}");
        }
    }

    #[test]
    fn rejects_empty_family() {
        assert!(solve_mkl(&[], &DVector::zeros(2), 0.1, 1e-3, &MklConfig::default()).is_err());
    }
}
