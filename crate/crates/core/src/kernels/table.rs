//! Green's function tables `ρ = F⁻¹{ρ̂}` sampled on a uniform offset grid.
//!
//! The table is the central window of one period of an inverse FFT. The
//! period is `2 · radius_max · padding`, so samples inside the window are
//! contaminated by wrap-around only through `ρ(r)` at `|r| ≥ padding ·
//! radius_max`. Frequencies above Nyquist are not discarded: the spectrum is
//! folded, i.e. each FFT bin receives `Σ_q ρ̂(ω_k + q·W)` over `|q| ≤ 8`
//! explicitly plus a power-law estimate of the remaining aliases. Grid values
//! are then the exact samples of the periodized kernel up to that estimate.
//!
//! In two dimensions the radial profile is the slice `ρ(r, 0)`, obtained
//! from the one-dimensional inverse transform of the marginal spectrum
//! `(2π)⁻¹ ∫ ρ̂(ω₁, ω₂) dω₂`.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use statrs::function::gamma::gamma as gamma_fn;

use super::fourier::exponential_response_1d;
use super::{Family, KernelSpec};
use crate::{Error, Result};

const ALIAS_LIMIT: f64 = 1e-6;

/// The transform pair the table was computed under.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FourierConvention {
    /// `f̂(ω) = ∫ f(x) e^{−i⟨ω,x⟩} dx`, `f(x) = (2π)^{−d} ∫ f̂(ω) e^{i⟨ω,x⟩} dω`.
    AngularNegativeExponent,
}

#[derive(Clone, Copy, Debug)]
pub struct TableOptions {
    /// Ratio of the FFT half-period to `radius_max`.
    pub padding: f64,
    /// Number of explicitly summed spectral aliases on each side.
    pub aliases: usize,
}

impl Default for TableOptions {
    fn default() -> Self {
        Self {
            padding: 4.0,
            aliases: 8,
        }
    }
}

/// Radial samples of a Green's function. `offsets` run along the first
/// coordinate axis from `−radius_max` to `radius_max`.
#[derive(Clone, Debug)]
pub struct GreensFunctionTable {
    pub dim: usize,
    pub step: f64,
    pub offsets: Vec<f64>,
    pub values: Vec<f64>,
    pub convention: FourierConvention,
    /// FFT period used to compute the samples.
    pub period: f64,
    /// Estimated wrap-around error relative to the peak.
    pub alias_estimate: f64,
}

impl GreensFunctionTable {
    pub fn radius_max(&self) -> f64 {
        *self.offsets.last().expect("table is nonempty")
    }

    pub fn peak(&self) -> f64 {
        self.values[self.values.len() / 2]
    }

    /// Offsets as `d`-vectors `(r, 0, …)`.
    pub fn offset_vectors(&self) -> Vec<Vec<f64>> {
        self.offsets
            .iter()
            .map(|&r| {
                let mut v = vec![0.0; self.dim];
                v[0] = r;
                v
            })
            .collect()
    }

    /// Cubic (four-point Lagrange) interpolation at radius `r ≥ 0`. Beyond
    /// the table, `tail_nu = Some(ν)` extrapolates with `r^{ν−1/2} e^{−r}`
    /// matched at the edge; `None` fails with [`Error::TableMissing`].
    pub fn eval_radial(&self, r: f64, tail_nu: Option<f64>) -> Result<f64> {
        let r = r.abs();
        let edge = self.radius_max();
        if r > edge {
            return match tail_nu {
                Some(nu) => {
                    let last = *self.values.last().expect("table is nonempty");
                    Ok(last * (r / edge).powf(nu - 0.5) * (edge - r).exp())
                }
                None => Err(Error::TableMissing { radius: r, max: edge }),
            };
        }
        let center = self.values.len() / 2;
        let pos = r / self.step;
        let j = (pos.floor() as usize).min(self.values.len() - center - 2);
        // nodes j-1, j, j+1, j+2 relative to the center; shift inward at the edge
        let start = (center + j).saturating_sub(1).min(self.values.len() - 4);
        let t = pos - (start as f64 - center as f64);
        let v = &self.values[start..start + 4];
        // Lagrange basis at nodes 0, 1, 2, 3 evaluated at t
        let l0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
        let l1 = t * (t - 2.0) * (t - 3.0) / 2.0;
        let l2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
        let l3 = t * (t - 1.0) * (t - 2.0) / 6.0;
        Ok(v[0] * l0 + v[1] * l1 + v[2] * l2 + v[3] * l3)
    }
}

/// Builds the table with [`TableOptions::default`].
pub fn fourier_greens_table(spec: &KernelSpec, radius_max: f64, n_samples: usize) -> Result<GreensFunctionTable> {
    fourier_greens_table_with(spec, radius_max, n_samples, TableOptions::default())
}

pub fn fourier_greens_table_with(
    spec: &KernelSpec,
    radius_max: f64,
    n_samples: usize,
    options: TableOptions,
) -> Result<GreensFunctionTable> {
    spec.validate()?;
    if n_samples < 64 || !n_samples.is_power_of_two() {
        return Err(Error::InvalidConfig(format!(
            "n_samples must be a power of two no smaller than 64, got {n_samples}"
        )));
    }
    if !(radius_max.is_finite() && radius_max > 0.0) {
        return Err(Error::InvalidConfig(format!("radius_max must be positive, got {radius_max}")));
    }
    if !(options.padding >= 1.0) {
        return Err(Error::InvalidConfig("padding must be at least 1".into()));
    }
    if spec.dim > 2 {
        return Err(Error::InvalidSpec("tables are available for d ≤ 2 only".into()));
    }
    let marginal = MarginalSpectrum::new(spec)?;

    let n = n_samples;
    let period = 2.0 * radius_max * options.padding;
    let step = period / n as f64;
    let half_count = (radius_max / step).floor() as usize;
    if half_count < 2 {
        return Err(Error::ResolutionTooCoarse {
            estimate: f64::INFINITY,
            limit: ALIAS_LIMIT,
        });
    }
    let d_omega = 2.0 * PI / period;
    let band = n as f64 * d_omega;

    let q_max = options.aliases as i64;
    let folded: Vec<f64> = (0..n)
        .map(|k| {
            let signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
            let mut acc = 0.0;
            for q in -q_max..=q_max {
                acc += marginal.eval((signed + (q * n as i64) as f64) * d_omega);
            }
            // Remaining aliases on each side via the midpoint rule for a
            // power-law tail: Σ_{q>Q} f(a + qW) ≈ f(a')·a'/((p−1)W).
            let edge = q_max as f64 + 0.5;
            for start in [(edge * n as f64 + signed) * d_omega, (edge * n as f64 - signed) * d_omega] {
                acc += marginal.tail_sum(start, band);
            }
            acc
        })
        .collect();

    let mut buffer: Vec<Complex64> = folded.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buffer);
    let periodic: Vec<f64> = buffer.iter().map(|c| c.re / period).collect();

    let peak = periodic[0];
    let alias_estimate = periodic[n / 2].abs() / peak.abs();
    if !(alias_estimate <= ALIAS_LIMIT) {
        return Err(Error::ResolutionTooCoarse {
            estimate: alias_estimate,
            limit: ALIAS_LIMIT,
        });
    }

    let count = 2 * half_count + 1;
    let mut offsets = Vec::with_capacity(count);
    let mut values = Vec::with_capacity(count);
    for i in 0..count {
        let j = i as i64 - half_count as i64;
        offsets.push(j as f64 * step);
        // symmetrize: ρ is even for every radial family here
        let a = periodic[j.rem_euclid(n as i64) as usize];
        let b = periodic[(-j).rem_euclid(n as i64) as usize];
        values.push(0.5 * (a + b));
    }

    Ok(GreensFunctionTable {
        dim: spec.dim,
        step,
        offsets,
        values,
        convention: FourierConvention::AngularNegativeExponent,
        period,
        alias_estimate,
    })
}

/// One-dimensional even spectrum whose inverse transform is the radial
/// profile, with its asymptotic power-law decay exponent.
enum MarginalSpectrum {
    Bessel { order: f64, gamma: f64, scale: f64 },
    Exponential { alpha: f64, gamma: f64 },
}

impl MarginalSpectrum {
    fn new(spec: &KernelSpec) -> Result<Self> {
        match (&spec.family, spec.dim) {
            (Family::BesselPotential { s, gamma }, 1) => Ok(Self::Bessel {
                order: *s,
                gamma: *gamma,
                scale: 1.0,
            }),
            // (2π)⁻¹ ∫ (1 + ω₁² + ω₂²)^{−s/2} dω₂
            //   = Γ((s−1)/2) / (2√π Γ(s/2)) · (1 + ω₁²)^{−(s−1)/2}
            (Family::BesselPotential { s, gamma }, 2) => Ok(Self::Bessel {
                order: s - 1.0,
                gamma: *gamma,
                scale: gamma_fn(0.5 * (s - 1.0)) / (2.0 * PI.sqrt() * gamma_fn(0.5 * s)),
            }),
            // Separable: the marginal of ρ̂₁(ω₁)ρ̂₁(ω₂) is ρ̂₁(ω₁)·ρ₁(0) = ρ̂₁(ω₁).
            (Family::Exponential { alpha, gamma }, 1 | 2) => Ok(Self::Exponential {
                alpha: *alpha,
                gamma: *gamma,
            }),
            (Family::Transformed { .. }, _) => Err(Error::InvalidSpec(
                "tables are built for radial base families; tabulate the base kernel instead".into(),
            )),
            _ => Err(Error::InvalidSpec("tables are available for d ≤ 2 only".into())),
        }
    }

    fn eval(&self, w: f64) -> f64 {
        match *self {
            Self::Bessel { order, gamma, scale } => scale / gamma * (1.0 + (w / gamma).powi(2)).powf(-0.5 * order),
            Self::Exponential { alpha, gamma } => exponential_response_1d(alpha, gamma, w),
        }
    }

    fn decay_exponent(&self) -> Option<f64> {
        match *self {
            Self::Bessel { order, .. } => Some(order),
            Self::Exponential { alpha, .. } if alpha < 2.0 => Some(1.0 + alpha),
            Self::Exponential { .. } => None,
        }
    }

    fn tail_sum(&self, start: f64, band: f64) -> f64 {
        match self.decay_exponent() {
            Some(p) => self.eval(start) * start / ((p - 1.0) * band),
            None => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::bessel_peak;

    #[test]
    fn bessel_s2_matches_closed_form_on_nodes() {
        let spec = KernelSpec::bessel(2.0, 1.0, 1).unwrap();
        let table = fourier_greens_table(&spec, 5.0, 1 << 14).unwrap();
        let worst = table
            .offsets
            .iter()
            .zip(&table.values)
            .map(|(r, v)| (v - 0.5 * (-r.abs()).exp()).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "sup error {worst:e}");
        assert_eq!(table.offsets.first().copied(), Some(-table.radius_max()));
    }

    #[test]
    fn exponential_alpha1_normalization() {
        let spec = KernelSpec::exponential(1.0, 1.0, 1).unwrap();
        let table = fourier_greens_table(&spec, 5.0, 1 << 14).unwrap();
        assert!((table.peak() - 1.0).abs() < 1e-6, "{}", table.peak());
    }

    #[test]
    fn bessel_2d_slice_matches_closed_form() {
        // s = 3, d = 2 has the closed form e^{−r}/(2π).
        let spec = KernelSpec::bessel(3.0, 1.0, 2).unwrap();
        let table = fourier_greens_table(&spec, 5.0, 1 << 14).unwrap();
        for (r, v) in table.offsets.iter().zip(&table.values) {
            let want = (-r.abs()).exp() / (2.0 * PI);
            assert!((v - want).abs() < 1e-6, "r {r}: {v} vs {want}");
        }
    }

    #[test]
    fn table_peak_matches_bessel_normalization_off_closed_form() {
        let spec = KernelSpec::bessel(2.6, 1.0, 1).unwrap();
        let table = fourier_greens_table(&spec, 8.0, 1 << 14).unwrap();
        assert!((table.peak() - bessel_peak(2.6, 1)).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_sample_counts() {
        let spec = KernelSpec::bessel(2.0, 1.0, 1).unwrap();
        assert!(fourier_greens_table(&spec, 5.0, 100).is_err());
        assert!(fourier_greens_table(&spec, 5.0, 32).is_err());
        assert!(fourier_greens_table(&spec, -1.0, 128).is_err());
    }

    #[test]
    fn slow_decay_is_flagged_as_too_coarse() {
        // exp(−|r|^{1/2}) is still ~1e-3 at the wrap point.
        let spec = KernelSpec::exponential(0.5, 1.0, 1).unwrap();
        assert!(matches!(
            fourier_greens_table(&spec, 5.0, 1 << 10),
            Err(Error::ResolutionTooCoarse { .. })
        ));
    }

    #[test]
    fn interpolation_between_nodes() {
        let spec = KernelSpec::bessel(4.0, 1.0, 1).unwrap();
        let table = fourier_greens_table(&spec, 10.0, 1 << 14).unwrap();
        let closed = spec.compile().unwrap();
        for &r in &[0.0, 0.013, 0.5, 1.2345, 3.3, 9.99] {
            let want = closed.eval_offset(&[r]).unwrap();
            let got = table.eval_radial(r, None).unwrap();
            assert!((got - want).abs() < 1e-8, "r {r}: {got} vs {want}");
        }
        assert!(table.eval_radial(10.5, None).is_err());
    }
}
