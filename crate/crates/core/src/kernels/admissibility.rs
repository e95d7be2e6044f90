//! Numerical admissibility check.
//!
//! A kernel is accepted when three probes pass:
//!
//! 1. decay: `max |ρ|` on the sphere of radius `r₂` stays below
//!    `decay_fraction · ρ(0)`;
//! 2. non-vanishing: `ρ̂ > 0` on a grid over the frequency box `[ω₁, ω₂]^d`
//!    (both signs per axis beyond the first);
//! 3. heavy tail: along the first frequency axis, the least-squares slope of
//!    `ln ρ̂` against `ln ω` is at least `−slope_cap`, and the magnitude of
//!    the local log-log slope does not grow faster than `growth_cap` per unit
//!    of `ln ω` over the upper half of the band. Polynomial tails have a
//!    bounded local slope; Gaussian tails have `|slope| = ω²/(2γ)`.

use std::f64::consts::PI;
use std::fmt;

use super::fourier::ln_fourier_response;
use super::KernelSpec;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct ProbeConfig {
    pub radius_range: (f64, f64),
    pub frequency_range: (f64, f64),
    pub radial_directions: usize,
    pub frequency_samples: usize,
    pub decay_fraction: f64,
    pub slope_cap: f64,
    pub growth_cap: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            radius_range: (1.0, 200.0),
            frequency_range: (1.0, 50.0),
            radial_directions: 64,
            frequency_samples: 48,
            decay_fraction: 1e-3,
            slope_cap: 40.0,
            growth_cap: 1.0,
        }
    }
}

impl ProbeConfig {
    /// Default probe with radii scaled by `width` and frequencies by `1/width`.
    pub fn scaled(width: f64) -> Self {
        let base = Self::default();
        Self {
            radius_range: (base.radius_range.0 * width, base.radius_range.1 * width),
            frequency_range: (base.frequency_range.0 / width, base.frequency_range.1 / width),
            ..base
        }
    }

    fn validate(&self) -> Result<()> {
        let (r1, r2) = self.radius_range;
        let (w1, w2) = self.frequency_range;
        if !(r1.is_finite() && r2.is_finite() && r1 > 0.0 && r2 > r1) {
            return Err(Error::ProbeRangeInvalid(format!(
                "radius range must satisfy r2 > r1 > 0, got [{r1}, {r2}]"
            )));
        }
        if !(w1.is_finite() && w2.is_finite() && w1 > 0.0 && w2 > w1) {
            return Err(Error::ProbeRangeInvalid(format!(
                "frequency range must satisfy w2 > w1 > 0, got [{w1}, {w2}]"
            )));
        }
        if self.frequency_samples < 8 || self.radial_directions < 1 {
            return Err(Error::ProbeRangeInvalid("too few probe samples".into()));
        }
        if !(self.decay_fraction > 0.0 && self.slope_cap > 0.0 && self.growth_cap >= 0.0) {
            return Err(Error::ProbeRangeInvalid("thresholds must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Criterion {
    Decay,
    NonVanishing,
    HeavyTail,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Decay => "decay",
            Criterion::NonVanishing => "non-vanishing",
            Criterion::HeavyTail => "heavy-tail",
        })
    }
}

#[derive(Clone, Debug)]
pub struct Diagnostic {
    pub criterion: Criterion,
    pub statistic: &'static str,
    pub value: f64,
    /// Pass bound for the statistic, when it has one.
    pub threshold: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct AdmissibilityReport {
    pub decays_at_infinity: bool,
    pub fourier_nonvanishing: bool,
    pub fourier_heavy_tailed: bool,
    pub admissible: bool,
    pub diagnostics: Vec<Diagnostic>,
    pub probe: ProbeConfig,
}

impl fmt::Display for AdmissibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flag = |b: bool| if b { "pass" } else { "FAIL" };
        writeln!(
            f,
            "probe: r in [{}, {}], omega in [{}, {}]",
            self.probe.radius_range.0, self.probe.radius_range.1, self.probe.frequency_range.0, self.probe.frequency_range.1
        )?;
        for (criterion, ok) in [
            (Criterion::Decay, self.decays_at_infinity),
            (Criterion::NonVanishing, self.fourier_nonvanishing),
            (Criterion::HeavyTail, self.fourier_heavy_tailed),
        ] {
            writeln!(f, "{criterion}: {}", flag(ok))?;
            for d in self.diagnostics.iter().filter(|d| d.criterion == criterion) {
                match d.threshold {
                    Some(t) => writeln!(f, "  {} = {:.6e} (bound {:.6e})", d.statistic, d.value, t)?,
                    None => writeln!(f, "  {} = {:.6e}", d.statistic, d.value)?,
                }
            }
        }
        write!(f, "admissible: {}", if self.admissible { "yes" } else { "no" })
    }
}

pub fn check_admissibility(spec: &KernelSpec, probe: &ProbeConfig) -> Result<AdmissibilityReport> {
    probe.validate()?;
    let kernel = spec.compile()?;
    let d = spec.dim;
    let mut diagnostics = Vec::new();

    // decay
    let peak = kernel.eval_offset(&vec![0.0; d])?;
    let r2 = probe.radius_range.1;
    let mut shell_max = 0.0_f64;
    for u in sphere_directions(d, probe.radial_directions) {
        let point: Vec<f64> = u.iter().map(|c| c * r2).collect();
        shell_max = shell_max.max(kernel.eval_offset(&point)?.abs());
    }
    let decay_ratio = shell_max / peak.abs();
    let decays_at_infinity = peak.is_finite() && decay_ratio < probe.decay_fraction;
    diagnostics.push(Diagnostic {
        criterion: Criterion::Decay,
        statistic: "max |rho| on outer shell / rho(0)",
        value: decay_ratio,
        threshold: Some(probe.decay_fraction),
    });

    // non-vanishing over the frequency box
    let (w1, w2) = probe.frequency_range;
    let per_axis = log_space(w1, w2, if d <= 2 { 12 } else { 5 });
    let mut min_ln = f64::INFINITY;
    for omega in box_points(&per_axis, d) {
        let v = ln_fourier_response(spec, &omega)?;
        min_ln = if v.is_nan() { f64::NEG_INFINITY } else { min_ln.min(v) };
    }
    let fourier_nonvanishing = min_ln > f64::NEG_INFINITY;
    diagnostics.push(Diagnostic {
        criterion: Criterion::NonVanishing,
        statistic: "min ln rho_hat over frequency box",
        value: min_ln,
        threshold: None,
    });

    // heavy tail along the first axis
    let freqs = log_space(w1, w2, probe.frequency_samples);
    let ln_w: Vec<f64> = freqs.iter().map(|w| w.ln()).collect();
    let mut ln_v = Vec::with_capacity(freqs.len());
    for &w in &freqs {
        let mut omega = vec![0.0; d];
        omega[0] = w;
        ln_v.push(ln_fourier_response(spec, &omega)?);
    }
    let (fitted_slope, growth) = if ln_v.iter().all(|v| v.is_finite()) {
        let slope = regression_slope(&ln_w, &ln_v);
        let local: Vec<(f64, f64)> = (1..freqs.len() - 1)
            .map(|i| {
                let s = (ln_v[i + 1] - ln_v[i - 1]) / (ln_w[i + 1] - ln_w[i - 1]);
                (ln_w[i], s.abs())
            })
            .collect();
        let upper = &local[local.len() / 2..];
        let xs: Vec<f64> = upper.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = upper.iter().map(|p| p.1).collect();
        (slope, regression_slope(&xs, &ys))
    } else {
        (f64::NEG_INFINITY, f64::INFINITY)
    };
    let fourier_heavy_tailed = fitted_slope >= -probe.slope_cap && growth <= probe.growth_cap;
    diagnostics.push(Diagnostic {
        criterion: Criterion::HeavyTail,
        statistic: "fitted log-log slope",
        value: fitted_slope,
        threshold: Some(-probe.slope_cap),
    });
    diagnostics.push(Diagnostic {
        criterion: Criterion::HeavyTail,
        statistic: "growth of |local slope| per unit ln omega",
        value: growth,
        threshold: Some(probe.growth_cap),
    });

    Ok(AdmissibilityReport {
        decays_at_infinity,
        fourier_nonvanishing,
        fourier_heavy_tailed,
        admissible: decays_at_infinity && fourier_nonvanishing && fourier_heavy_tailed,
        diagnostics,
        probe: probe.clone(),
    })
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

fn sphere_directions(d: usize, count: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            let mut dirs = Vec::new();
            for i in 0..d {
                for sign in [1.0, -1.0] {
                    let mut v = vec![0.0; d];
                    v[i] = sign;
                    dirs.push(v);
                }
            }
            dirs.push(vec![1.0 / (d as f64).sqrt(); d]);
            dirs
        }
    }
}

// First coordinate positive, the rest take both signs.
fn box_points(per_axis: &[f64], d: usize) -> Vec<Vec<f64>> {
    let mut points: Vec<Vec<f64>> = per_axis.iter().map(|&w| vec![w]).collect();
    for _ in 1..d {
        let mut next = Vec::with_capacity(points.len() * per_axis.len() * 2);
        for p in &points {
            for &w in per_axis {
                for sign in [1.0, -1.0] {
                    let mut q = p.clone();
                    q.push(sign * w);
                    next.push(q);
                }
            }
        }
        points = next;
    }
    points
}

fn regression_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn admissible(spec: KernelSpec) -> AdmissibilityReport {
        check_admissibility(&spec, &ProbeConfig::default()).unwrap()
    }

    #[test]
    fn laplace_kernel_is_admissible() {
        let r = admissible(KernelSpec::exponential(1.0, 1.0, 1).unwrap());
        assert!(r.admissible, "{r}");
    }

    #[test]
    fn gaussian_fails_only_the_heavy_tail_test() {
        let r = admissible(KernelSpec::gaussian(1.0, 1).unwrap());
        assert!(r.decays_at_infinity && r.fourier_nonvanishing, "{r}");
        assert!(!r.fourier_heavy_tailed && !r.admissible, "{r}");
    }

    #[test]
    fn bessel_in_two_dimensions_is_admissible() {
        let r = admissible(KernelSpec::bessel(3.0, 1.0, 2).unwrap());
        assert!(r.admissible, "{r}");
    }

    #[test]
    fn transformed_kernel_stays_admissible() {
        let base = KernelSpec::exponential(1.5, 1.0, 2).unwrap();
        let a = nalgebra::DMatrix::from_row_slice(2, 2, &[1.5, 0.3, -0.2, 0.8]);
        let r = admissible(KernelSpec::transformed(base, &a).unwrap());
        assert!(r.admissible, "{r}");
    }

    #[test]
    fn probe_ranges_are_checked() {
        let spec = KernelSpec::exponential(1.0, 1.0, 1).unwrap();
        let bad = ProbeConfig {
            radius_range: (2.0, 1.0),
            ..ProbeConfig::default()
        };
        assert!(matches!(check_admissibility(&spec, &bad), Err(Error::ProbeRangeInvalid(_))));
        let bad = ProbeConfig {
            frequency_range: (0.0, 10.0),
            ..ProbeConfig::default()
        };
        assert!(matches!(check_admissibility(&spec, &bad), Err(Error::ProbeRangeInvalid(_))));
    }

    #[test]
    fn report_mentions_each_criterion() {
        let text = admissible(KernelSpec::exponential(1.0, 1.0, 1).unwrap()).to_string();
        for key in ["decay", "non-vanishing", "heavy-tail", "admissible: yes"] {
            assert!(text.contains(key), "{text}");
        }
    }
}
