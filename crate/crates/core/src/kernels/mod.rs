//! Admissible shift-invariant kernels `k(x, y) = ρ(x − y)`.
//!
//! Three families are provided:
//!
//! - exponential kernels `exp(−γ‖r‖_α^α)` with `0 < α ≤ 2` (α = 2 is the
//!   Gaussian, which is constructible but not admissible),
//! - Bessel potentials `G_s(γ r)`, the Green's functions of `(I − Δ)^{s/2}`,
//! - affine transforms `k(A x, A y)` of any of the above.
//!
//! A [`KernelSpec`] is plain, serializable data. [`KernelSpec::compile`]
//! produces a [`Kernel`] that evaluates quickly; Bessel potentials without a
//! closed form carry a shared [`GreensFunctionTable`].
//!
//! Fourier convention: `f̂(ω) = ∫ f(x) e^{−i⟨ω,x⟩} dx`, with `(2π)^{−d}` on
//! the inverse transform.

mod admissibility;
mod fourier;
mod table;

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma as gamma_fn;

use crate::{Error, Result};

pub use admissibility::{check_admissibility, AdmissibilityReport, Criterion, ProbeConfig};
pub use fourier::{fourier_response, ln_fourier_response};
pub use table::{fourier_greens_table, FourierConvention, GreensFunctionTable, TableOptions};

/// Number of FFT samples used for the tables backing compiled kernels.
pub const DEFAULT_TABLE_SAMPLES: usize = 1 << 14;

/// Radius (in units of `1/γ`) covered by the tables backing compiled kernels.
const COMPILED_TABLE_RADIUS: f64 = 25.0;

const DET_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Exponential {
        alpha: f64,
        gamma: f64,
    },
    #[serde(alias = "bessel")]
    BesselPotential {
        s: f64,
        gamma: f64,
    },
    Transformed {
        base: Box<KernelSpec>,
        /// Row-major `d × d` mixing matrix.
        mix: Vec<Vec<f64>>,
    },
}

/// A parameterized kernel family in ambient dimension `dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default = "default_dim")]
    pub dim: usize,
}

fn default_dim() -> usize {
    1
}

impl KernelSpec {
    pub fn exponential(alpha: f64, gamma: f64, dim: usize) -> Result<Self> {
        let spec = Self {
            family: Family::Exponential { alpha, gamma },
            dim,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The Gaussian `exp(−γ‖r‖²)`, i.e. the exponential family at α = 2.
    pub fn gaussian(gamma: f64, dim: usize) -> Result<Self> {
        Self::exponential(2.0, gamma, dim)
    }

    pub fn bessel(s: f64, gamma: f64, dim: usize) -> Result<Self> {
        let spec = Self {
            family: Family::BesselPotential { s, gamma },
            dim,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn transformed(base: KernelSpec, mix: &DMatrix<f64>) -> Result<Self> {
        let rows = (0..mix.nrows())
            .map(|i| mix.row(i).iter().copied().collect())
            .collect();
        let spec = Self {
            dim: base.dim,
            family: Family::Transformed {
                base: Box::new(base),
                mix: rows,
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks the constructor invariants. Deserialized specs must pass
    /// through here before use.
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidSpec("dim must be at least 1".into()));
        }
        match &self.family {
            Family::Exponential { alpha, gamma } => {
                if !(alpha.is_finite() && *alpha > 0.0 && *alpha <= 2.0) {
                    return Err(Error::InvalidSpec(format!("alpha must lie in (0, 2], got {alpha}")));
                }
                check_gamma(*gamma)
            }
            Family::BesselPotential { s, gamma } => {
                if !(s.is_finite() && *s > self.dim as f64) {
                    return Err(Error::InvalidSpec(format!(
                        "s must exceed the dimension d = {}, got {s}",
                        self.dim
                    )));
                }
                check_gamma(*gamma)
            }
            Family::Transformed { base, mix } => {
                base.validate()?;
                if base.dim != self.dim {
                    return Err(Error::InvalidSpec(format!(
                        "base kernel dimension {} differs from {}",
                        base.dim, self.dim
                    )));
                }
                let a = mix_matrix(mix, self.dim)?;
                let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                if !(scale.is_finite()) || a.determinant().abs() <= DET_TOLERANCE * scale.powi(self.dim as i32) {
                    return Err(Error::InvalidSpec("mixing matrix must be invertible".into()));
                }
                Ok(())
            }
        }
    }

    /// Characteristic length: the offset at which exponential kernels fall
    /// to `e^{−1}`, `1/γ` for Bessel potentials.
    pub fn width(&self) -> f64 {
        match &self.family {
            Family::Exponential { alpha, gamma } => gamma.powf(-1.0 / alpha),
            Family::BesselPotential { gamma, .. } => 1.0 / gamma,
            Family::Transformed { base, mix } => {
                let inv_norm = mix_matrix(mix, self.dim)
                    .ok()
                    .and_then(|a| a.try_inverse())
                    .map(|inv| inv.singular_values().max())
                    .unwrap_or(1.0);
                base.width() * inv_norm
            }
        }
    }

    /// `ρ(0)`, the kernel's peak value.
    pub fn peak(&self) -> f64 {
        match &self.family {
            Family::Exponential { .. } => 1.0,
            Family::BesselPotential { s, .. } => bessel_peak(*s, self.dim),
            Family::Transformed { base, .. } => base.peak(),
        }
    }

    /// Validates the spec and prepares a fast evaluator. Bessel potentials
    /// whose order `(s − d)/2` is not a half-integer build a Green's function
    /// table here (d ≤ 2 only).
    pub fn compile(&self) -> Result<Kernel> {
        self.validate()?;
        let profile = match &self.family {
            Family::Exponential { alpha, gamma } => Profile::Exponential {
                alpha: *alpha,
                gamma: *gamma,
            },
            Family::BesselPotential { s, gamma } => {
                let radial = match HalfIntegerBessel::new(*s, self.dim) {
                    Some(closed) => BesselRadial::Closed(closed),
                    None => {
                        let unit = KernelSpec::bessel(*s, 1.0, self.dim)?;
                        let table =
                            fourier_greens_table(&unit, COMPILED_TABLE_RADIUS, DEFAULT_TABLE_SAMPLES)?;
                        BesselRadial::Table {
                            table: Arc::new(table),
                            nu: 0.5 * (s - self.dim as f64),
                            extrapolate: true,
                        }
                    }
                };
                Profile::Bessel { gamma: *gamma, radial }
            }
            Family::Transformed { base, mix } => Profile::Transformed {
                base: Box::new(base.compile()?),
                mix: mix_matrix(mix, self.dim)?,
            },
        };
        Ok(Kernel {
            spec: self.clone(),
            profile,
        })
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("gamma must be positive, got {gamma}")))
    }
}

pub(crate) fn mix_matrix(rows: &[Vec<f64>], dim: usize) -> Result<DMatrix<f64>> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidSpec(format!("mixing matrix must be {dim}×{dim}")));
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
}

/// `G_s(0) = (2π)^{−d/2} 2^{1−s/2} Γ(ν) 2^{ν−1} / Γ(s/2)` with `ν = (s − d)/2 > 0`.
pub(crate) fn bessel_peak(s: f64, dim: usize) -> f64 {
    let d = dim as f64;
    let nu = 0.5 * (s - d);
    (2.0 * PI).powf(-0.5 * d) * 2.0_f64.powf(1.0 - 0.5 * s) / gamma_fn(0.5 * s) * 2.0_f64.powf(nu - 1.0) * gamma_fn(nu)
}

/// Closed form of `G_s` when `ν = (s − d)/2 = n + 1/2`:
/// `r^ν K_ν(r) = √(π/2) e^{−r} Σ_k (n+k)!/(k!(n−k)!) 2^{−k} r^{n−k}`.
#[derive(Clone, Debug)]
struct HalfIntegerBessel {
    norm: f64,
    /// Polynomial coefficients in descending powers of `r`.
    coeffs: Vec<f64>,
}

impl HalfIntegerBessel {
    fn new(s: f64, dim: usize) -> Option<Self> {
        let d = dim as f64;
        let twice_nu = s - d;
        let rounded = twice_nu.round();
        if (twice_nu - rounded).abs() > 1e-12 || rounded < 1.0 || (rounded as i64) % 2 != 1 {
            return None;
        }
        let n = ((rounded as i64 - 1) / 2) as usize;
        let coeffs = (0..=n)
            .map(|k| {
                let num: f64 = ((n - k + 1)..=(n + k)).map(|v| v as f64).product();
                let den: f64 = (1..=k).map(|v| v as f64).product();
                num / den / 2.0_f64.powi(k as i32)
            })
            .collect();
        let norm = (2.0 * PI).powf(-0.5 * d) * 2.0_f64.powf(1.0 - 0.5 * s) / gamma_fn(0.5 * s) * (0.5 * PI).sqrt();
        Some(Self { norm, coeffs })
    }

    fn eval(&self, r: f64) -> f64 {
        let poly = self.coeffs.iter().fold(0.0, |acc, c| acc * r + c);
        self.norm * (-r).exp() * poly
    }
}

#[derive(Clone, Debug)]
enum BesselRadial {
    Closed(HalfIntegerBessel),
    Table {
        table: Arc<GreensFunctionTable>,
        nu: f64,
        extrapolate: bool,
    },
}

#[derive(Clone, Debug)]
enum Profile {
    Exponential { alpha: f64, gamma: f64 },
    Bessel { gamma: f64, radial: BesselRadial },
    Transformed { base: Box<Kernel>, mix: DMatrix<f64> },
}

/// A validated, ready-to-evaluate kernel. Immutable and cheap to share.
#[derive(Clone, Debug)]
pub struct Kernel {
    spec: KernelSpec,
    profile: Profile,
}

impl Kernel {
    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    /// Controls what happens past the edge of a backing table: extrapolate
    /// with the `r^{ν−1/2} e^{−r}` asymptote (default), or fail with
    /// [`Error::TableMissing`].
    pub fn with_extrapolation(mut self, enabled: bool) -> Self {
        self.set_extrapolation(enabled);
        self
    }

    fn set_extrapolation(&mut self, enabled: bool) {
        match &mut self.profile {
            Profile::Bessel {
                radial: BesselRadial::Table { extrapolate, .. },
                ..
            } => *extrapolate = enabled,
            Profile::Transformed { base, .. } => base.set_extrapolation(enabled),
            _ => {}
        }
    }

    /// `k(x, y) = ρ(x − y)`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let d = self.dim();
        if x.len() != d || y.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "kernel of dimension {d} evaluated at points of length {} and {}",
                x.len(),
                y.len()
            )));
        }
        match d {
            1 => self.eval_offset(&[x[0] - y[0]]),
            2 => self.eval_offset(&[x[0] - y[0], x[1] - y[1]]),
            _ => {
                let r: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
                self.eval_offset(&r)
            }
        }
    }

    /// `ρ(r)` for an offset `r` of length `dim`.
    pub fn eval_offset(&self, r: &[f64]) -> Result<f64> {
        match &self.profile {
            Profile::Exponential { alpha, gamma } => {
                let sum: f64 = if *alpha == 2.0 {
                    r.iter().map(|v| v * v).sum()
                } else if *alpha == 1.0 {
                    r.iter().map(|v| v.abs()).sum()
                } else {
                    r.iter().map(|v| v.abs().powf(*alpha)).sum()
                };
                Ok((-gamma * sum).exp())
            }
            Profile::Bessel { gamma, radial } => {
                let dist = gamma * r.iter().map(|v| v * v).sum::<f64>().sqrt();
                match radial {
                    BesselRadial::Closed(closed) => Ok(closed.eval(dist)),
                    BesselRadial::Table {
                        table,
                        nu,
                        extrapolate,
                    } => table.eval_radial(dist, (*extrapolate).then_some(*nu)),
                }
            }
            Profile::Transformed { base, mix } => {
                let mixed = mix * DVector::from_column_slice(r);
                base.eval_offset(mixed.as_slice())
            }
        }
    }
}

/// Evaluates `k(x, y)` for a spec. Compiles the spec on every call; hot
/// loops should compile once with [`KernelSpec::compile`].
pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.compile()?.eval(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exponential_closed_form_values() {
        let k = KernelSpec::exponential(1.0, 1.0, 1).unwrap();
        assert_eq!(eval_kernel(&k, &[0.0], &[0.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(eval_kernel(&k, &[2.0_f64.ln()], &[0.0]).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn bessel_s2_d1_is_half_exponential() {
        let k = KernelSpec::bessel(2.0, 1.0, 1).unwrap();
        let v = eval_kernel(&k, &[1.0], &[0.0]).unwrap();
        assert_abs_diff_eq!(v, 0.5 * (-1.0_f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.183_939_7, epsilon = 1e-7);
    }

    #[test]
    fn bessel_peak_matches_closed_form() {
        for (s, d) in [(2.0, 1), (4.0, 1), (3.0, 2), (5.0, 2), (4.0, 3)] {
            let k = KernelSpec::bessel(s, 1.0, d).unwrap().compile().unwrap();
            let zero = vec![0.0; d];
            assert_abs_diff_eq!(k.eval_offset(&zero).unwrap(), bessel_peak(s, d), epsilon = 1e-14);
        }
    }

    #[test]
    fn bessel_gamma_scales_argument() {
        let k = KernelSpec::bessel(2.0, 3.0, 1).unwrap();
        let v = eval_kernel(&k, &[0.5], &[0.0]).unwrap();
        assert_abs_diff_eq!(v, 0.5 * (-1.5_f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn constructor_invariants() {
        assert!(KernelSpec::exponential(0.0, 1.0, 1).is_err());
        assert!(KernelSpec::exponential(2.5, 1.0, 1).is_err());
        assert!(KernelSpec::exponential(2.0, 1.0, 1).is_ok());
        assert!(KernelSpec::exponential(1.0, 0.0, 1).is_err());
        assert!(KernelSpec::bessel(1.0, 1.0, 1).is_err());
        assert!(KernelSpec::bessel(0.5, 1.0, 1).is_err());
        assert!(KernelSpec::bessel(2.5, 1.0, 2).is_ok());
        let base = KernelSpec::exponential(1.0, 1.0, 2).unwrap();
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(KernelSpec::transformed(base.clone(), &singular).is_err());
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 2.0, 0.0]);
        assert!(KernelSpec::transformed(base, &rot).is_ok());
    }

    #[test]
    fn alpha_message_names_invariant() {
        let err = KernelSpec::exponential(3.0, 1.0, 1).unwrap_err().to_string();
        assert!(err.contains("alpha must lie in (0, 2]"), "{err}");
    }

    #[test]
    fn transformed_applies_mix() {
        let base = KernelSpec::exponential(1.5, 0.7, 2).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, -0.3, 1.0]);
        let t = KernelSpec::transformed(base.clone(), &a).unwrap();
        let (x, y) = ([0.3, -0.2], [1.1, 0.4]);
        let ax = &a * DVector::from_column_slice(&x);
        let ay = &a * DVector::from_column_slice(&y);
        let expect = eval_kernel(&base, ax.as_slice(), ay.as_slice()).unwrap();
        assert_abs_diff_eq!(eval_kernel(&t, &x, &y).unwrap(), expect, epsilon = 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let k = KernelSpec::exponential(1.0, 1.0, 2).unwrap().compile().unwrap();
        assert!(matches!(k.eval(&[0.0], &[0.0]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn table_backed_bessel_without_extrapolation_fails_far_out() {
        let k = KernelSpec::bessel(2.5, 1.0, 1).unwrap().compile().unwrap();
        assert!(k.eval_offset(&[100.0]).unwrap() >= 0.0);
        let strict = k.with_extrapolation(false);
        assert!(matches!(strict.eval_offset(&[100.0]), Err(Error::TableMissing { .. })));
        assert!(strict.eval_offset(&[1.0]).is_ok());
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let spec = KernelSpec::exponential(1.99, 4.0, 1).unwrap();
        let text = toml::to_string(&spec).unwrap();
        assert!(text.contains("family = \"exponential\""), "{text}");
        let back: KernelSpec = toml::from_str(&text).unwrap();
        assert_eq!(back, spec);
        let bessel: KernelSpec = toml::from_str("family = \"bessel\"\ns = 3.0\ngamma = 1.0\ndim = 2\n").unwrap();
        assert_eq!(bessel, KernelSpec::bessel(3.0, 1.0, 2).unwrap());
    }
}
