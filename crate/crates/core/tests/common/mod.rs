#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn normal_matrix(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn normal_vector(rng: &mut ChaCha20Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| StandardNormal.sample(rng))
}

/// Cyclic coordinate descent on `‖Da − y‖² + λ‖a‖₁`.
pub fn coordinate_descent(d: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let p = d.ncols();
    let mut a = DVector::zeros(p);
    let mut residual = y.clone();
    let norms: Vec<f64> = (0..p).map(|j| d.column(j).norm_squared()).collect();
    for _ in 0..200_000 {
        let mut change: f64 = 0.0;
        for j in 0..p {
            if norms[j] == 0.0 {
                continue;
            }
            let col = d.column(j);
            let rho = col.dot(&residual) + norms[j] * a[j];
            let next = if rho > lambda / 2.0 {
                (rho - lambda / 2.0) / norms[j]
            } else if rho < -lambda / 2.0 {
                (rho + lambda / 2.0) / norms[j]
            } else {
                0.0
            };
            let delta = next - a[j];
            if delta != 0.0 {
                residual -= col * delta;
                a[j] = next;
                change = change.max(delta.abs());
            }
        }
        if change < 1e-15 {
            break;
        }
    }
    a
}
