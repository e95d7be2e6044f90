use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

const SINGULAR_RCOND: f64 = 1e-13;
const RESIDUAL_TOL: f64 = 1e-10;

/// `‖G a − y‖² + λ aᵀ G a`.
pub fn ridge_objective(gram: &DMatrix<f64>, targets: &DVector<f64>, lambda: f64, a: &DVector<f64>) -> f64 {
    let ga = gram * a;
    (&ga - targets).norm_squared() + lambda * a.dot(&ga)
}

/// Minimizes `‖G a − y‖² + λ aᵀ G a` for a symmetric PSD Gram matrix.
///
/// The stationarity condition `G((G + λI) a − y) = 0` is met by solving
/// `(G + λI) a = y`. When `G + λI` is not positive definite (a Gram matrix
/// that is only PSD up to rounding), the normal equations
/// `(GᵀG + λG) a = Gᵀy` are solved by a regularized eigen-decomposition.
pub fn solve_ridge(gram: &DMatrix<f64>, targets: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    let m = targets.len();
    if gram.nrows() != m || gram.ncols() != m {
        return Err(Error::DimensionMismatch(format!(
            "Gram matrix is {}×{} for {m} targets",
            gram.nrows(),
            gram.ncols()
        )));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidConfig(format!("lambda must be ≥ 0, got {lambda}")));
    }
    if m == 0 {
        return Ok(DVector::zeros(0));
    }

    if lambda == 0.0 {
        let eig = gram.clone().symmetric_eigen();
        let max = eig.eigenvalues.amax();
        let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b.abs()));
        if !(max > 0.0) || min <= SINGULAR_RCOND * max {
            return Err(Error::SingularSystem);
        }
    }

    let mut system = gram.clone();
    for i in 0..m {
        system[(i, i)] += lambda;
    }
    if let Some(chol) = system.clone().cholesky() {
        let mut a = chol.solve(targets);
        // a couple of refinement sweeps tighten the residual on
        // ill-conditioned systems
        for _ in 0..3 {
            let r = targets - &system * &a;
            if r.norm() <= RESIDUAL_TOL * targets.norm() {
                break;
            }
            a += chol.solve(&r);
        }
        return Ok(a);
    }
    if lambda == 0.0 {
        return Err(Error::SingularSystem);
    }

    // (GᵀG + λG) a = Gᵀy with a small diagonal shift
    let gt = gram.transpose();
    let mut normal = &gt * gram + gram * lambda;
    normal = (&normal + normal.transpose()) * 0.5;
    let rhs = &gt * targets;
    let eig = normal.symmetric_eigen();
    let scale = eig.eigenvalues.amax();
    let floor = 1e-14 * scale;
    let mut a = DVector::zeros(m);
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev > floor {
            let v = eig.eigenvectors.column(k);
            a += v * (v.dot(&rhs) / ev);
        }
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn scalar_example() {
        let a = solve_ridge(&DMatrix::identity(1, 1), &DVector::from_vec(vec![2.0]), 1.0).unwrap();
        assert_abs_diff_eq!(a[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn two_by_two_against_closed_form_inverse() {
        let e = (-1.0_f64).exp();
        let lambda = 0.1;
        let g = DMatrix::from_row_slice(2, 2, &[1.0, e, e, 1.0]);
        let y = DVector::from_vec(vec![1.0, 1.0]);
        let a = solve_ridge(&g, &y, lambda).unwrap();
        // [[p, q], [q, p]]⁻¹ (1, 1)ᵀ = (1, 1)ᵀ / (p + q)
        let want = 1.0 / (1.0 + lambda + e);
        assert_abs_diff_eq!(a[0], want, epsilon = 1e-15);
        assert_abs_diff_eq!(a[1], want, epsilon = 1e-15);
    }

    #[test]
    fn interpolates_at_zero_lambda() {
        let g = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.5, 2.0, 0.3, 0.1, 0.3, 2.0]);
        let y = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let a = solve_ridge(&g, &y, 0.0).unwrap();
        assert!((&g * a - &y).norm() < 1e-14);
    }

    #[test]
    fn singular_gram_without_regularization_fails() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let y = DVector::from_vec(vec![1.0, 0.0]);
        assert!(matches!(solve_ridge(&g, &y, 0.0), Err(Error::SingularSystem)));
        assert!(solve_ridge(&g, &y, 0.5).is_ok());
    }

    #[test]
    fn stationarity_holds() {
        let g = DMatrix::from_row_slice(3, 3, &[1.0, 0.6, 0.2, 0.6, 1.0, 0.6, 0.2, 0.6, 1.0]);
        let y = DVector::from_vec(vec![0.3, 1.0, -0.4]);
        let lambda = 0.7;
        let a = solve_ridge(&g, &y, lambda).unwrap();
        let grad = 2.0 * &g * (&g * &a - &y) + 2.0 * lambda * &g * &a;
        assert!(grad.amax() < 1e-13);
        // any perturbation increases the objective
        let base = ridge_objective(&g, &y, lambda, &a);
        for j in 0..3 {
            let mut b = a.clone();
            b[j] += 1e-4;
            assert!(ridge_objective(&g, &y, lambda, &b) > base);
        }
    }
}
