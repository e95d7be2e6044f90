//! Generalized LASSO `‖D a − y‖² + λ‖a‖₁` by accelerated proximal gradient.
//!
//! The smooth part has gradient `2Dᵀ(Da − y)` and Lipschitz constant
//! `L = 2σ_max(D)²`, so a step `1/L` is followed by soft thresholding at
//! `λ/L` (equivalently `λ·s/2` for the step `s = 1/σ²` of the ½-scaled
//! loss). Momentum is reset whenever the objective would increase, which
//! keeps the trace monotone. At checkpoints spaced geometrically in the
//! iteration count, the iterate seeds an active-set descent that minimizes
//! exactly on the current sign face, walks to the first sign change, and
//! admits the worst KKT violator; the result is kept when it lowers both
//! the objective and the KKT residual.

use nalgebra::{DMatrix, DVector};

use super::refit::{numerical_rank, RANK_RTOL};
use super::{active_set, SolverConfig, SolverResult, StepRule};
use crate::{Error, Result};

const LIPSCHITZ_SAFETY: f64 = 1.01;
const POWER_TOL: f64 = 1e-6;
const FIRST_POLISH: usize = 16;

/// `‖D a − y‖² + λ‖a‖₁`.
pub fn lasso_objective(design: &DMatrix<f64>, targets: &DVector<f64>, lambda: f64, a: &DVector<f64>) -> f64 {
    (design * a - targets).norm_squared() + lambda * a.lp_norm(1)
}

/// Optimality residual with `g = 2Dᵀ(Da − y)`: the largest of
/// `|g_j + λ sign(a_j)|` over the support and `max(0, |g_j| − λ)` elsewhere.
pub fn kkt_residual_lasso(design: &DMatrix<f64>, targets: &DVector<f64>, lambda: f64, a: &DVector<f64>) -> f64 {
    let g = design.tr_mul(&(design * a - targets)) * 2.0;
    kkt_from_gradient(&g, lambda, a)
}

fn kkt_from_gradient(g: &DVector<f64>, lambda: f64, a: &DVector<f64>) -> f64 {
    g.iter()
        .zip(a.iter())
        .map(|(&gj, &aj)| {
            if aj != 0.0 {
                (gj + lambda * aj.signum()).abs()
            } else {
                (gj.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// `2 σ_max(D)²` by power iteration on the smaller of `DᵀD` and `DDᵀ`,
/// stopped at `1e−6` relative change.
pub fn lipschitz_constant(design: &DMatrix<f64>) -> f64 {
    let (m, p) = design.shape();
    if m == 0 || p == 0 {
        return 0.0;
    }
    let gram = if m <= p { design * design.transpose() } else { design.tr_mul(design) };
    let n = gram.nrows();
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.1 * ((i + 1) as f64).sin());
    v /= v.norm();
    let mut estimate = 0.0;
    for _ in 0..10_000 {
        let w = &gram * &v;
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (next - estimate).abs() <= POWER_TOL * next.abs() {
            estimate = next;
            break;
        }
        estimate = next;
    }
    2.0 * estimate
}

fn soft_threshold(v: &DVector<f64>, tau: f64) -> DVector<f64> {
    v.map(|x| {
        if x > tau {
            x - tau
        } else if x < -tau {
            x + tau
        } else {
            0.0
        }
    })
}

/// Solves from `a = 0`.
pub fn solve_lasso(design: &DMatrix<f64>, targets: &DVector<f64>, config: &SolverConfig) -> Result<SolverResult> {
    solve_lasso_from(design, targets, config, None)
}

/// Solves from an optional warm start.
pub fn solve_lasso_from(
    design: &DMatrix<f64>,
    targets: &DVector<f64>,
    config: &SolverConfig,
    start: Option<&DVector<f64>>,
) -> Result<SolverResult> {
    config.validate()?;
    let (m, p) = design.shape();
    if targets.len() != m {
        return Err(Error::DimensionMismatch(format!("design has {m} rows for {} targets", targets.len())));
    }
    if design.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("design and targets must be finite".into()));
    }
    let lambda = config.lambda;
    let mut x = match start {
        Some(s) if s.len() == p => s.clone(),
        Some(s) => {
            return Err(Error::DimensionMismatch(format!("warm start of length {} for {p} columns", s.len())));
        }
        None => DVector::zeros(p),
    };

    let objective = |a: &DVector<f64>| lasso_objective(design, targets, lambda, a);
    let smooth = |a: &DVector<f64>| (design * a - targets).norm_squared();
    let gradient = |a: &DVector<f64>| design.tr_mul(&(design * a - targets)) * 2.0;

    let mut f_x = objective(&x);
    let mut trace = vec![f_x];
    let lipschitz = lipschitz_constant(design) * LIPSCHITZ_SAFETY;
    if lipschitz == 0.0 || p == 0 {
        // D = 0: every a gives the same fit, so a = 0 is optimal for λ ≥ 0
        let zero = DVector::zeros(p);
        let f0 = objective(&zero);
        trace.push(f0);
        return Ok(SolverResult {
            kkt_residual: kkt_residual_lasso(design, targets, lambda, &zero),
            active_set: Vec::new(),
            coeffs: zero,
            objective_trace: trace,
            iterations: 0,
            converged: true,
        });
    }
    let mut step_l = match config.step_rule {
        StepRule::FixedFromPowerIteration => lipschitz,
        StepRule::Backtracking => {
            let col_max = (0..p).map(|j| design.column(j).norm_squared()).fold(0.0, f64::max);
            (2.0 * col_max).max(f64::MIN_POSITIVE)
        }
    };

    // proximal step from `base` with gradient `g`; backtracking grows step_l
    let prox_step = |base: &DVector<f64>, g: &DVector<f64>, step_l: &mut f64| -> DVector<f64> {
        loop {
            let z = soft_threshold(&(base - g / *step_l), lambda / *step_l);
            if config.step_rule == StepRule::FixedFromPowerIteration {
                return z;
            }
            let diff = &z - base;
            let bound = smooth(base) + g.dot(&diff) + 0.5 * *step_l * diff.norm_squared();
            if smooth(&z) <= bound * (1.0 + 1e-12) + 1e-300 || *step_l >= lipschitz * 1e6 {
                return z;
            }
            *step_l *= 2.0;
        }
    };

    let mut y = x.clone();
    let mut t = 1.0_f64;
    let mut kkt = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    let mut next_polish = FIRST_POLISH;
    let mut last_polish_support: Option<Vec<usize>> = None;

    for it in 1..=config.max_iters {
        iterations = it;
        let g_y = gradient(&y);
        let mut z = prox_step(&y, &g_y, &mut step_l);
        let mut f_z = objective(&z);
        if f_z > f_x {
            // restart from x with a plain proximal step, which cannot increase F
            t = 1.0;
            let g_x = gradient(&x);
            z = prox_step(&x, &g_x, &mut step_l);
            f_z = objective(&z);
            if f_z > f_x {
                z = x.clone();
                f_z = f_x;
            }
        }
        let x_prev = std::mem::replace(&mut x, z);
        let f_prev = f_x;
        f_x = f_z;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &x + (&x - &x_prev) * ((t - 1.0) / t_next);
        t = t_next;

        let rel_change = (f_prev - f_x).abs() / f_prev.abs().max(f64::MIN_POSITIVE);
        let stalled = rel_change < config.tol_rel_obj;
        let checkpoint = it == next_polish;
        if checkpoint {
            next_polish *= 2;
        }
        if stalled || checkpoint {
            let g_x = gradient(&x);
            kkt = kkt_from_gradient(&g_x, lambda, &x);
            if kkt >= config.tol_kkt {
                let support: Vec<usize> = (0..p).filter(|&j| x[j] != 0.0).collect();
                if checkpoint || last_polish_support.as_ref() != Some(&support) {
                    let polished = polish(design, targets, lambda, &x, 4 * (p + m));
                    let f_pol = objective(&polished);
                    let kkt_pol = kkt_residual_lasso(design, targets, lambda, &polished);
                    if f_pol <= f_x && kkt_pol < kkt {
                        x = polished;
                        f_x = f_pol;
                        kkt = kkt_pol;
                        y = x.clone();
                        t = 1.0;
                    }
                    last_polish_support = Some(support);
                }
            }
            if stalled && kkt < config.tol_kkt {
                trace.push(f_x);
                converged = true;
                break;
            }
        }
        trace.push(f_x);
    }
    if !converged {
        kkt = kkt_residual_lasso(design, targets, lambda, &x);
    }

    Ok(SolverResult {
        active_set: active_set(&x),
        coeffs: x,
        objective_trace: trace,
        kkt_residual: kkt,
        iterations,
        converged,
    })
}

/// Minimizer of `‖D_S z − y‖² + λ sᵀz` over the column space of `D_S`, or a
/// null direction of `D_S` oriented so that `sᵀh ≤ 0` when the columns are
/// dependent.
enum FaceStep {
    Minimizer(DVector<f64>),
    Null(DVector<f64>),
}

fn face_step(sub: &DMatrix<f64>, targets: &DVector<f64>, lambda: f64, signs: &DVector<f64>) -> FaceStep {
    let (m, k) = sub.shape();
    let rows = m.max(k);
    let mut square = DMatrix::zeros(rows, k);
    square.view_mut((0, 0), (m, k)).copy_from(sub);
    let mut padded_y = DVector::zeros(rows);
    padded_y.rows_mut(0, m).copy_from(targets);
    let svd = square.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V");
    let values = &svd.singular_values;
    if numerical_rank(values) < k {
        let (i_min, _) = values.argmin();
        let mut h: DVector<f64> = v_t.row(i_min).transpose();
        if signs.dot(&h) > 0.0 {
            h = -h;
        }
        return FaceStep::Null(h);
    }
    let cutoff = RANK_RTOL * values.amax();
    let mut z = DVector::zeros(k);
    for i in 0..values.len() {
        let sigma = values[i];
        if sigma <= cutoff {
            continue;
        }
        let v: DVector<f64> = v_t.row(i).transpose();
        let coef = u.column(i).dot(&padded_y) / sigma - 0.5 * lambda * v.dot(signs) / (sigma * sigma);
        z += v * coef;
    }
    FaceStep::Minimizer(z)
}

/// Active-set descent from `start`: minimize on the sign face, step to the
/// first sign change when the face minimizer leaves the orthant, follow null
/// directions of dependent supports, then admit the coordinate with the
/// largest KKT violation. Every move is non-increasing in the objective.
fn polish(design: &DMatrix<f64>, targets: &DVector<f64>, lambda: f64, start: &DVector<f64>, max_moves: usize) -> DVector<f64> {
    let p = design.ncols();
    let mut x = start.clone();
    let mut signs: Vec<f64> = x.iter().map(|v| if *v == 0.0 { 0.0 } else { v.signum() }).collect();
    let mut banned = vec![false; p];
    let mut entering: Option<usize> = None;
    let mut moves = 0;
    'outer: loop {
        // minimize on the current face
        loop {
            moves += 1;
            if moves > max_moves {
                break 'outer;
            }
            let support: Vec<usize> = (0..p).filter(|&j| signs[j] != 0.0).collect();
            if support.is_empty() {
                break;
            }
            let sub = design.select_columns(&support);
            let s = DVector::from_iterator(support.len(), support.iter().map(|&j| signs[j]));
            let xs = DVector::from_iterator(support.len(), support.iter().map(|&j| x[j]));
            let (direction, full) = match face_step(&sub, targets, lambda, &s) {
                FaceStep::Minimizer(z) => (z - &xs, true),
                FaceStep::Null(h) => (h, false),
            };
            let blocking: Vec<(usize, f64)> = (0..support.len())
                .filter(|&k| s[k] * direction[k] < 0.0)
                .map(|k| (k, (xs[k] / -direction[k]).max(0.0)))
                .collect();
            let cap = if full { 1.0 } else { f64::INFINITY };
            let alpha = blocking.iter().map(|&(_, t)| t).fold(cap, f64::min);
            if !alpha.is_finite() {
                break;
            }
            for (k, &j) in support.iter().enumerate() {
                x[j] = xs[k] + alpha * direction[k];
            }
            let hit: Vec<usize> = blocking.iter().filter(|&&(_, t)| t <= alpha).map(|&(k, _)| k).collect();
            if hit.is_empty() {
                break;
            }
            for k in hit {
                let j = support[k];
                x[j] = 0.0;
                signs[j] = 0.0;
                if alpha == 0.0 && Some(j) == entering {
                    banned[j] = true;
                }
            }
        }
        // admit the worst KKT violator
        let g = design.tr_mul(&(design * &x - targets)) * 2.0;
        let slack = 1e-12 * (lambda + g.amax());
        let candidate = (0..p)
            .filter(|&j| signs[j] == 0.0 && !banned[j] && g[j].abs() > lambda + slack)
            .max_by(|&i, &j| g[i].abs().total_cmp(&g[j].abs()));
        match candidate {
            Some(j) => {
                signs[j] = -g[j].signum();
                entering = Some(j);
            }
            None => break,
        }
    }
    for j in 0..p {
        if signs[j] == 0.0 {
            x[j] = 0.0;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn identity_problem() -> (DMatrix<f64>, DVector<f64>) {
        (DMatrix::identity(2, 2), DVector::from_vec(vec![2.0, 0.1]))
    }

    #[test]
    fn orthonormal_soft_threshold() {
        let (d, y) = identity_problem();
        let r = solve_lasso(&d, &y, &SolverConfig::with_lambda(1.0)).unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(r.coeffs[0], 1.5, epsilon = 1e-12);
        assert_eq!(r.coeffs[1], 0.0);
        assert_eq!(r.active_set, vec![0]);
    }

    #[test]
    fn kkt_examples() {
        let (d, y) = identity_problem();
        let opt = DVector::from_vec(vec![1.5, 0.0]);
        assert!(kkt_residual_lasso(&d, &y, 1.0, &opt) < 1e-10);
        let zero = DVector::zeros(3);
        let dz = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, -1.0, 0.5, 3.0]);
        assert_eq!(kkt_residual_lasso(&dz, &DVector::zeros(2), 0.3, &zero), 0.0);
        let bumped = DVector::from_vec(vec![1.6, 0.0]);
        // g₁ = 2(1.6 − 2) = −0.8, so |g₁ + λ| = 0.2
        assert_abs_diff_eq!(kkt_residual_lasso(&d, &y, 1.0, &bumped), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn large_lambda_kills_scalar_coefficient() {
        let d = DMatrix::identity(1, 1);
        let y = DVector::from_vec(vec![1.0]);
        for lambda in [2.0, 3.0, 10.0] {
            let r = solve_lasso(&d, &y, &SolverConfig::with_lambda(lambda)).unwrap();
            assert_eq!(r.coeffs[0], 0.0);
            assert!(r.active_set.is_empty());
        }
    }

    #[test]
    fn zero_lambda_is_least_squares() {
        let d = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 2.9, 5.2, 6.8]);
        let r = solve_lasso(&d, &y, &SolverConfig::with_lambda(0.0)).unwrap();
        let ls = d.clone().svd(true, true).solve(&y, 1e-14).unwrap();
        assert!((r.coeffs - ls).amax() < 1e-9);
    }

    #[test]
    fn backtracking_trace_is_monotone() {
        let d = DMatrix::from_fn(6, 12, |i, j| ((i * 7 + j * 3) as f64).sin());
        let y = DVector::from_fn(6, |i, _| (i as f64).cos());
        let config = SolverConfig {
            step_rule: StepRule::Backtracking,
            ..SolverConfig::with_lambda(0.05)
        };
        let r = solve_lasso(&d, &y, &config).unwrap();
        assert!(r.converged);
        for w in r.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{} > {}", w[1], w[0]);
        }
    }

    #[test]
    fn warm_start_must_match_width() {
        let (d, y) = identity_problem();
        let bad = DVector::zeros(3);
        assert!(solve_lasso_from(&d, &y, &SolverConfig::with_lambda(1.0), Some(&bad)).is_err());
    }

    #[test]
    fn non_convergence_is_reported() {
        let d = DMatrix::from_fn(6, 12, |i, j| ((i * 7 + j * 3) as f64).sin());
        let y = DVector::from_fn(6, |i, _| (i as f64).cos());
        let config = SolverConfig {
            max_iters: 2,
            ..SolverConfig::with_lambda(0.01)
        };
        let r = solve_lasso(&d, &y, &config).unwrap();
        assert!(!r.converged);
        assert!(matches!(r.require_converged(), Err(Error::NotConverged { iterations: 2 })));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let (d, y) = identity_problem();
        assert!(matches!(
            solve_lasso(&d, &y, &SolverConfig::with_lambda(-1.0)),
            Err(Error::InvalidConfig(_))
        ));
    }
}
