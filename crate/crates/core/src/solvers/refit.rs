use nalgebra::{DMatrix, DVector};

use super::active_set;
use crate::{Error, Result};

/// Singular values below `RANK_RTOL · σ_max` count as zero.
pub(super) const RANK_RTOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct Debiased {
    /// Least-squares coefficients on `active`, zero elsewhere.
    pub coeffs: DVector<f64>,
    pub active: Vec<usize>,
    pub residual_norm: f64,
}

pub(super) fn singular_values_padded(sub: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let (m, k) = sub.shape();
    // pad with zero rows so V spans the full column space including the kernel
    let square = if m < k {
        let mut padded = DMatrix::zeros(k, k);
        padded.view_mut((0, 0), (m, k)).copy_from(sub);
        padded
    } else {
        sub.clone()
    };
    let svd = square.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    (svd.singular_values, v_t)
}

pub(super) fn numerical_rank(values: &DVector<f64>) -> usize {
    let max = values.amax();
    if max == 0.0 {
        return 0;
    }
    values.iter().filter(|&&s| s > RANK_RTOL * max).count()
}

/// Unpenalized least squares on the columns in `support`, zeros elsewhere.
pub fn refit_on_support(design: &DMatrix<f64>, targets: &DVector<f64>, support: &[usize]) -> Result<DVector<f64>> {
    let (m, p) = design.shape();
    if targets.len() != m {
        return Err(Error::DimensionMismatch(format!("design has {m} rows for {} targets", targets.len())));
    }
    if let Some(&bad) = support.iter().find(|&&j| j >= p) {
        return Err(Error::DimensionMismatch(format!("support index {bad} out of {p} columns")));
    }
    let mut coeffs = DVector::zeros(p);
    if support.is_empty() {
        return Ok(coeffs);
    }
    let sub = design.select_columns(support);
    let (values, _) = singular_values_padded(&sub);
    let rank = numerical_rank(&values);
    if rank < support.len() {
        return Err(Error::RankDeficientSupport {
            rank,
            size: support.len(),
        });
    }
    let solved = sub
        .svd(true, true)
        .solve(targets, 0.0)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    for (k, &j) in support.iter().enumerate() {
        coeffs[j] = solved[k];
    }
    Ok(coeffs)
}

/// Moves `coeffs` along null directions of the active columns until those
/// columns are linearly independent.
///
/// Every step leaves `D a` unchanged up to the rank tolerance, never
/// increases `‖a‖₁`, and zeroes at least one coefficient, so the result has
/// at most `rank(D) ≤ M` nonzeros.
pub fn reduce_to_independent_support(design: &DMatrix<f64>, coeffs: &DVector<f64>) -> DVector<f64> {
    let mut a = coeffs.clone();
    loop {
        let support: Vec<usize> = (0..a.len()).filter(|&j| a[j] != 0.0).collect();
        if support.is_empty() {
            return a;
        }
        let sub = design.select_columns(&support);
        let (values, v_t) = singular_values_padded(&sub);
        if numerical_rank(&values) == support.len() {
            return a;
        }
        let (k_min, _) = values.argmin();
        let mut h: DVector<f64> = v_t.row(k_min).transpose();
        let slope: f64 = support.iter().enumerate().map(|(k, &j)| a[j].signum() * h[k]).sum();
        if slope > 0.0 {
            h = -h;
        }
        let mut best: Option<(usize, f64)> = None;
        for (k, &j) in support.iter().enumerate() {
            if a[j] * h[k] < 0.0 {
                let t = -a[j] / h[k];
                if best.is_none_or(|(_, b)| t < b) {
                    best = Some((k, t));
                }
            }
        }
        let Some((k_hit, t)) = best else {
            return a;
        };
        for (k, &j) in support.iter().enumerate() {
            a[j] += t * h[k];
        }
        a[support[k_hit]] = 0.0;
    }
}

/// Thresholds at the activity level, removes linear dependence among the
/// surviving columns, and refits them without penalty.
pub fn debias(design: &DMatrix<f64>, targets: &DVector<f64>, coeffs: &DVector<f64>) -> Result<Debiased> {
    let mut kept = DVector::zeros(coeffs.len());
    for j in active_set(coeffs) {
        kept[j] = coeffs[j];
    }
    let reduced = reduce_to_independent_support(design, &kept);
    let active: Vec<usize> = (0..reduced.len()).filter(|&j| reduced[j] != 0.0).collect();
    let refit = refit_on_support(design, targets, &active)?;
    let residual_norm = (design * &refit - targets).norm();
    Ok(Debiased {
        coeffs: refit,
        active,
        residual_norm,
    })
}
