//! Fourier responses `ρ̂(ω) = ∫ ρ(x) e^{−i⟨ω,x⟩} dx`.
//!
//! Bessel potentials and the exponential family at α ∈ {1, 2} have closed
//! forms. Other exponential kernels are separable across coordinates, and
//! each one-dimensional factor is computed either from its large-|ω|
//! expansion (the tail of the symmetric α-stable density) or by quadrature
//! along a rotated ray in the complex plane, where the integrand decays
//! exponentially instead of oscillating.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use statrs::function::gamma::{gamma as gamma_fn, ln_gamma};

use super::{mix_matrix, Family, KernelSpec};
use crate::quad::{integrate_half_line, QuadTolerance};
use crate::{Error, Result};

const SERIES_MAX_TERMS: usize = 40;
const SERIES_REL_TOL: f64 = 1e-16;

/// `ρ̂(ω)` for a kernel spec.
pub fn fourier_response(spec: &KernelSpec, omega: &[f64]) -> Result<f64> {
    spec.validate()?;
    check_len(spec, omega)?;
    Ok(response(spec, omega))
}

/// `ln ρ̂(ω)`. Gaussian responses are evaluated in the log domain so that
/// far-tail probes do not underflow.
pub fn ln_fourier_response(spec: &KernelSpec, omega: &[f64]) -> Result<f64> {
    spec.validate()?;
    check_len(spec, omega)?;
    Ok(ln_response(spec, omega))
}

fn check_len(spec: &KernelSpec, omega: &[f64]) -> Result<()> {
    if omega.len() != spec.dim {
        return Err(Error::DimensionMismatch(format!(
            "frequency of length {} for a kernel of dimension {}",
            omega.len(),
            spec.dim
        )));
    }
    Ok(())
}

fn response(spec: &KernelSpec, omega: &[f64]) -> f64 {
    match &spec.family {
        Family::Exponential { alpha, gamma } => omega
            .iter()
            .map(|&w| exponential_response_1d(*alpha, *gamma, w))
            .product(),
        Family::BesselPotential { s, gamma } => bessel_response(*s, *gamma, omega),
        Family::Transformed { base, mix } => {
            let (mapped, det) = transformed_frequency(mix, spec.dim, omega);
            response(base, &mapped) / det.abs()
        }
    }
}

fn ln_response(spec: &KernelSpec, omega: &[f64]) -> f64 {
    match &spec.family {
        Family::Exponential { alpha, gamma } if *alpha == 2.0 => omega
            .iter()
            .map(|w| 0.5 * (PI / gamma).ln() - w * w / (4.0 * gamma))
            .sum(),
        Family::BesselPotential { s, gamma } => {
            let norm_sq: f64 = omega.iter().map(|w| w * w).sum();
            -(spec.dim as f64) * gamma.ln() - 0.5 * s * (norm_sq / (gamma * gamma)).ln_1p()
        }
        Family::Transformed { base, mix } => {
            let (mapped, det) = transformed_frequency(mix, spec.dim, omega);
            ln_response(base, &mapped) - det.abs().ln()
        }
        Family::Exponential { .. } => response(spec, omega).ln(),
    }
}

// For k(Ax, Ay): ρ̂_A(ω) = ρ̂(A^{−T} ω) / |det A|.
fn transformed_frequency(mix: &[Vec<f64>], dim: usize, omega: &[f64]) -> (Vec<f64>, f64) {
    let a = mix_matrix(mix, dim).expect("validated mixing matrix");
    let det = a.determinant();
    let inv_t = a.try_inverse().expect("validated mixing matrix").transpose();
    let mapped = inv_t * nalgebra::DVector::from_column_slice(omega);
    (mapped.as_slice().to_vec(), det)
}

/// `γ^{−d} (1 + ‖ω‖²/γ²)^{−s/2}`: the Bessel potential `G_s(γ r)`.
pub(crate) fn bessel_response(s: f64, gamma: f64, omega: &[f64]) -> f64 {
    let norm_sq: f64 = omega.iter().map(|w| w * w).sum();
    gamma.powi(-(omega.len() as i32)) * (1.0 + norm_sq / (gamma * gamma)).powf(-0.5 * s)
}

/// One-dimensional response of `exp(−γ|r|^α)`.
pub(crate) fn exponential_response_1d(alpha: f64, gamma: f64, w: f64) -> f64 {
    let w = w.abs();
    if alpha == 1.0 {
        return 2.0 * gamma / (gamma * gamma + w * w);
    }
    if alpha == 2.0 {
        return (PI / gamma).sqrt() * (-w * w / (4.0 * gamma)).exp();
    }
    // exp(−γ|r|^α) = ρ₁(c r) with c = γ^{1/α}, so ρ̂(w) = ρ̂₁(w/c)/c.
    let c = gamma.powf(1.0 / alpha);
    unit_exponential_response(alpha, w / c) / c
}

fn unit_exponential_response(alpha: f64, w: f64) -> f64 {
    if w == 0.0 {
        return 2.0 * gamma_fn(1.0 + 1.0 / alpha);
    }
    if let Some(v) = stable_tail_series(alpha, w) {
        return v;
    }
    rotated_quadrature(alpha, w)
}

/// Large-|ω| expansion
/// `ρ̂₁(ω) = 2 Σ_k (−1)^{k+1} Γ(αk+1)/k! sin(παk/2) ω^{−αk−1}`.
/// Convergent for α < 1 and asymptotic for α > 1; accepted only when the
/// term envelope falls below the tolerance while still decreasing.
pub(crate) fn stable_tail_series(alpha: f64, w: f64) -> Option<f64> {
    let ln_w = w.ln();
    let mut sum = 0.0;
    let mut prev_envelope = f64::INFINITY;
    for k in 1..=SERIES_MAX_TERMS {
        let kf = k as f64;
        let ln_env = ln_gamma(alpha * kf + 1.0) - ln_gamma(kf + 1.0) - (alpha * kf + 1.0) * ln_w;
        let envelope = ln_env.exp();
        if envelope > prev_envelope {
            return None;
        }
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        sum += sign * 2.0 * envelope * (0.5 * PI * alpha * kf).sin();
        if k > 1 && 2.0 * envelope <= SERIES_REL_TOL * sum.abs() {
            return (sum > 0.0).then_some(sum);
        }
        prev_envelope = envelope;
    }
    None
}

/// Rotating the integration ray to `r = t e^{iθ}` with `θ = min(π/2, π/(4α))`
/// keeps `Re(r^α) ≥ 0` while `e^{iωr}` turns into a decaying exponential.
///
/// For ω < 1 the direct integral `2 Re ∫ e^{−r^α} e^{iωr} dr` is used. For
/// larger ω an integration by parts and the substitution `u = t^α` give
/// `ρ̂₁(ω) = (2/ω) Im[e^{iαθ} ∫₀^∞ exp(−u e^{iαθ} + iω u^{1/α} e^{iθ}) du]`,
/// which avoids cancelling the leading `i/ω` contribution.
fn rotated_quadrature(alpha: f64, w: f64) -> f64 {
    let theta = (0.5 * PI).min(PI / (4.0 * alpha));
    let rot = Complex64::from_polar(1.0, theta);
    let rot_alpha = Complex64::from_polar(1.0, alpha * theta);
    let (decay_u, decay_w) = ((alpha * theta).cos(), theta.sin());
    let tol = QuadTolerance { abs: 1e-300, rel: 1e-13 };
    if w < 1.0 {
        let f = |t: f64| {
            let z = -rot_alpha * t.powf(alpha) + Complex64::i() * rot * (w * t);
            z.exp() * rot
        };
        let bound = |t: f64| (-t.powf(alpha) * decay_u - w * t * decay_w).exp();
        let v = integrate_half_line(&f, bound, 1.0, tol);
        2.0 * v.re
    } else {
        let inv_alpha = 1.0 / alpha;
        let f = |u: f64| {
            let z = -rot_alpha * u + Complex64::i() * rot * (w * u.powf(inv_alpha));
            z.exp()
        };
        let bound = |u: f64| (-u * decay_u - w * u.powf(inv_alpha) * decay_w).exp();
        let first = 1.0 / (1.0 + w.powf(alpha));
        let v = rot_alpha * integrate_half_line(&f, bound, first, tol);
        2.0 / w * v.im
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Independent oracle: composite Simpson on ∫_{-R}^{R} e^{−|x|^α} cos(ωx) dx
    // with a very fine mesh.
    fn simpson_oracle(alpha: f64, w: f64) -> f64 {
        let (r, n) = (40.0_f64, 400_000usize);
        let h = r / n as f64;
        let f = |x: f64| (-x.abs().powf(alpha)).exp() * (w * x).cos();
        let mut acc = f(0.0) + f(r);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        2.0 * acc * h / 3.0
    }

    #[test]
    fn closed_forms() {
        let b = KernelSpec::bessel(3.0, 1.0, 1).unwrap();
        assert_eq!(fourier_response(&b, &[0.0]).unwrap(), 1.0);
        let e = KernelSpec::exponential(1.0, 1.0, 1).unwrap();
        assert_eq!(fourier_response(&e, &[0.0]).unwrap(), 2.0);
        assert_eq!(fourier_response(&e, &[1.0]).unwrap(), 1.0);
    }

    #[test]
    fn quadrature_matches_simpson_at_moderate_frequencies() {
        for &alpha in &[1.2, 1.5, 1.99] {
            for &w in &[0.0, 0.3, 1.0, 2.5, 4.0] {
                let got = unit_exponential_response(alpha, w);
                let want = simpson_oracle(alpha, w);
                assert_relative_eq!(got, want, max_relative = 1e-7, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn series_and_quadrature_agree_where_both_apply() {
        for &(alpha, w) in &[(0.5, 30.0), (1.5, 40.0), (1.99, 60.0), (1.2, 25.0)] {
            let series = stable_tail_series(alpha, w).expect("series should converge");
            let quad = rotated_quadrature(alpha, w);
            assert_relative_eq!(series, quad, max_relative = 1e-8);
        }
    }

    #[test]
    fn exponential_response_is_positive_across_band() {
        for &alpha in &[0.5, 1.0, 1.5, 1.99] {
            let mut w = 0.01;
            while w < 200.0 {
                assert!(exponential_response_1d(alpha, 1.0, w) > 0.0, "alpha {alpha} w {w}");
                w *= 1.3;
            }
        }
    }

    #[test]
    fn gamma_scaling() {
        let (alpha, gamma, w): (f64, f64, f64) = (1.5, 2.7, 1.3);
        let c = gamma.powf(1.0 / alpha);
        // ∫ exp(−γ|x|^α) cos(ωx) dx via substitution x = y/c
        let want = simpson_oracle(alpha, w / c) / c;
        assert_relative_eq!(exponential_response_1d(alpha, gamma, w), want, max_relative = 1e-7);
    }

    #[test]
    fn transformed_response_uses_inverse_transpose() {
        let base = KernelSpec::bessel(3.0, 1.0, 2).unwrap();
        let a = nalgebra::DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        let t = KernelSpec::transformed(base.clone(), &a).unwrap();
        // A = diag(2, 1/2): A^{−T} ω = (ω₁/2, 2ω₂), |det A| = 1.
        let got = fourier_response(&t, &[1.0, 0.25]).unwrap();
        let want = fourier_response(&base, &[0.5, 0.5]).unwrap();
        assert_relative_eq!(got, want, max_relative = 1e-14);
    }

    #[test]
    fn ln_response_survives_gaussian_tail() {
        let g = KernelSpec::gaussian(1.0, 1).unwrap();
        let v = ln_fourier_response(&g, &[100.0]).unwrap();
        assert_relative_eq!(v, 0.5 * PI.ln() - 2500.0, max_relative = 1e-14);
    }
}
