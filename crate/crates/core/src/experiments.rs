//! Synthetic one-dimensional regression benchmark comparing five kernel
//! estimators.
//!
//! A piecewise-linear target is sampled at `M` uniform random sites with
//! Gaussian noise. Every estimator has its λ (and, for single-kernel
//! methods, its kernel width) chosen by K-fold cross-validation on
//! contiguous blocks of the sorted sites, is refit on all data, and is scored
//! by its mean squared deviation from the noiseless target on a dense grid.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::{assemble_gram, TrainingSet};
use crate::kernels::{Kernel, KernelSpec};
use crate::multigrid::{solve_multigrid, RefinementConfig};
use crate::solvers::{active_set, debias, solve_lasso, solve_mkl, solve_ridge, MklConfig, SolverConfig};
use crate::{Error, Result};

/// Number of points in the dense evaluation grid.
pub const DENSE_POINTS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticTask {
    /// `(position, value)` pairs sorted by position.
    pub knots: Vec<(f64, f64)>,
    pub domain: (f64, f64),
    pub m: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticTask {
    fn default() -> Self {
        Self {
            knots: vec![(-1.0, 0.0), (-0.6, 4.0), (-0.25, -2.0), (0.1, 3.0), (0.55, 6.0), (1.0, 1.0)],
            domain: (-1.0, 1.0),
            m: 40,
            noise_sigma: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticTask {
    pub fn validate(&self) -> Result<()> {
        if self.knots.is_empty() {
            return Err(Error::InvalidConfig("the target needs at least one knot".into()));
        }
        if self.knots.iter().any(|(x, y)| !(x.is_finite() && y.is_finite())) {
            return Err(Error::InvalidConfig("knots must be finite".into()));
        }
        if self.knots.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidConfig("knot positions must be strictly increasing".into()));
        }
        let (lo, hi) = self.domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidConfig("domain must be a finite interval with lo < hi".into()));
        }
        if self.m == 0 {
            return Err(Error::InvalidConfig("m must be at least 1".into()));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::InvalidConfig("noise_sigma must be ≥ 0".into()));
        }
        Ok(())
    }

    /// The noiseless target, constant beyond the outer knots.
    pub fn target(&self, x: f64) -> f64 {
        piecewise_linear(&self.knots, x)
    }
}

pub fn piecewise_linear(knots: &[(f64, f64)], x: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let k = knots.partition_point(|&(p, _)| p <= x);
    let (x0, y0) = knots[k - 1];
    let (x1, y1) = knots[k];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedTask {
    pub train: TrainingSet,
    pub dense_x: Vec<f64>,
    pub dense_truth: Vec<f64>,
}

/// Draws sorted uniform sites, then Gaussian noise, from one ChaCha20
/// stream seeded with `task.seed`.
pub fn generate_task(task: &SyntheticTask) -> Result<GeneratedTask> {
    task.validate()?;
    let (lo, hi) = task.domain;
    let mut rng = ChaCha20Rng::seed_from_u64(task.seed);
    let mut sites: Vec<f64> = (0..task.m).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect();
    sites.sort_by(f64::total_cmp);
    let targets: Vec<f64> = sites
        .iter()
        .map(|&x| {
            let noise: f64 = rng.sample(StandardNormal);
            task.target(x) + task.noise_sigma * noise
        })
        .collect();
    let train = TrainingSet::from_1d(&sites, &targets)?;
    let dense_x: Vec<f64> = (0..DENSE_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (DENSE_POINTS - 1) as f64)
        .collect();
    let dense_truth = dense_x.iter().map(|&x| task.target(x)).collect();
    Ok(GeneratedTask {
        train,
        dense_x,
        dense_truth,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    RkhsRidge,
    GenLasso,
    MklRidge,
    SingleGtv,
    MultiGtv,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::RkhsRidge,
        Method::GenLasso,
        Method::MklRidge,
        Method::SingleGtv,
        Method::MultiGtv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::RkhsRidge => "rkhs_ridge",
            Method::GenLasso => "gen_lasso",
            Method::MklRidge => "mkl_ridge",
            Method::SingleGtv => "single_gtv",
            Method::MultiGtv => "multi_gtv",
        }
    }

    /// Methods that fit all kernels jointly rather than selecting one.
    pub fn is_multi_kernel(self) -> bool {
        matches!(self, Method::MklRidge | Method::MultiGtv)
    }

    pub fn is_gtv(self) -> bool {
        matches!(self, Method::SingleGtv | Method::MultiGtv)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `count` widths spaced geometrically from `narrow` to `wide`.
pub fn log_spaced(narrow: f64, wide: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![narrow];
    }
    let (a, b) = (narrow.ln(), wide.ln());
    (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    pub method: Method,
    /// Candidate kernels for single-kernel methods, or the joint family.
    pub kernels: Vec<KernelSpec>,
    pub lambdas: Vec<f64>,
}

impl EstimatorSpec {
    /// Gaussians for the RKHS-type methods and exponential kernels with
    /// `α = 1.99` for the gTV methods, each at five widths from 0.05 to 0.8.
    pub fn default_for(method: Method) -> Self {
        let widths = log_spaced(0.05, 0.8, 5);
        let kernels = widths
            .iter()
            .map(|&w| {
                if method.is_gtv() {
                    KernelSpec::exponential(1.99, w.powf(-1.99), 1)
                } else {
                    KernelSpec::gaussian(w.powi(-2), 1)
                }
                .expect("default widths are valid")
            })
            .collect();
        let lambdas = match method {
            Method::RkhsRidge | Method::MklRidge => log_spaced(1e-3, 10.0, 5),
            _ => log_spaced(1e-2, 10.0, 7),
        };
        Self {
            method,
            kernels,
            lambdas,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernels.is_empty() || self.lambdas.is_empty() {
            return Err(Error::InvalidConfig(format!("{}: kernel and lambda grids must be nonempty", self.method)));
        }
        if self.method.is_multi_kernel() && self.kernels.len() < 2 {
            return Err(Error::InvalidConfig(format!("{} needs at least two kernels", self.method)));
        }
        if self.lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::InvalidConfig(format!("{}: lambdas must be finite and ≥ 0", self.method)));
        }
        if self.kernels.iter().any(|k| k.dim != 1) {
            return Err(Error::InvalidConfig(format!("{}: kernels must be one-dimensional", self.method)));
        }
        for k in &self.kernels {
            k.validate()?;
        }
        Ok(())
    }

    /// `(λ, kernel subset)` candidates in grid order.
    fn candidates(&self) -> Vec<(f64, Vec<usize>)> {
        let sets: Vec<Vec<usize>> = if self.method.is_multi_kernel() {
            vec![(0..self.kernels.len()).collect()]
        } else {
            (0..self.kernels.len()).map(|k| vec![k]).collect()
        };
        sets.iter()
            .flat_map(|s| self.lambdas.iter().map(move |&l| (l, s.clone())))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSettings {
    pub folds: usize,
    pub fold_scheme: FoldScheme,
    pub selection: SelectionRule,
    pub solver: SolverConfig,
    pub refinement: RefinementConfig,
    pub mkl: MklConfig,
    /// Weight of `‖μ‖²` in the MKL objective.
    pub mkl_eta: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            folds: 5,
            fold_scheme: FoldScheme::Contiguous,
            selection: SelectionRule::MinError,
            solver: SolverConfig::default(),
            refinement: RefinementConfig {
                initial_spacing: 0.1,
                min_spacing: 0.0125,
                ..RefinementConfig::default()
            },
            mkl: MklConfig::default(),
            mkl_eta: 1e-3,
        }
    }
}

/// `f(x) = Σ_t c_t k_{n_t}(x, z_t)`.
#[derive(Clone, Debug)]
pub struct Expansion {
    kernels: Vec<Kernel>,
    terms: Vec<(usize, Vec<f64>, f64)>,
}

impl Expansion {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.terms.iter().try_fold(0.0, |acc, (n, z, c)| Ok(acc + c * self.kernels[*n].eval(x, z)?))
    }

    pub fn eval_many(&self, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.eval(&[x])).collect()
    }
}

/// A fitted estimator on one training set.
#[derive(Clone, Debug)]
pub struct Fit {
    pub expansion: Expansion,
    /// Coefficients reported for the method, refit on the support for ℓ1
    /// methods.
    pub coeffs: Vec<f64>,
    pub sparsity: usize,
    pub converged: bool,
}

fn sites_expansion(block: usize, train: &TrainingSet, coeffs: &DVector<f64>) -> Vec<(usize, Vec<f64>, f64)> {
    (0..train.len())
        .filter(|&m| coeffs[m] != 0.0)
        .map(|m| (block, train.site(m).to_vec(), coeffs[m]))
        .collect()
}

/// Fits `method` with the given kernels and λ on `train`.
pub fn fit_method(
    method: Method,
    specs: &[KernelSpec],
    lambda: f64,
    train: &TrainingSet,
    settings: &FitSettings,
) -> Result<Fit> {
    let kernels = specs.iter().map(|s| s.compile()).collect::<Result<Vec<_>>>()?;
    let y = train.targets();
    match method {
        Method::RkhsRidge => {
            let gram = assemble_gram(&kernels[0], train)?;
            let a = solve_ridge(&gram, y, lambda)?;
            let terms = sites_expansion(0, train, &a);
            Ok(Fit {
                sparsity: active_set(&a).len(),
                coeffs: a.iter().copied().collect(),
                expansion: Expansion { kernels, terms },
                converged: true,
            })
        }
        Method::GenLasso => {
            let gram = assemble_gram(&kernels[0], train)?;
            let config = SolverConfig {
                lambda,
                ..settings.solver.clone()
            };
            let result = solve_lasso(&gram, y, &config)?;
            let refit = debias(&gram, y, &result.coeffs)?;
            let terms = sites_expansion(0, train, &result.coeffs);
            Ok(Fit {
                sparsity: refit.active.len(),
                coeffs: refit.coeffs.iter().copied().collect(),
                expansion: Expansion { kernels, terms },
                converged: result.converged,
            })
        }
        Method::MklRidge => {
            let grams = kernels.iter().map(|k| assemble_gram(k, train)).collect::<Result<Vec<_>>>()?;
            let r = solve_mkl(&grams, y, lambda, settings.mkl_eta, &settings.mkl)?;
            let mut terms = Vec::new();
            for (n, &mu) in r.mu.iter().enumerate() {
                if mu != 0.0 {
                    terms.extend(
                        sites_expansion(n, train, &r.coeffs)
                            .into_iter()
                            .map(|(n, z, c)| (n, z, c * mu)),
                    );
                }
            }
            Ok(Fit {
                sparsity: active_set(&r.coeffs).len(),
                coeffs: r.coeffs.iter().copied().collect(),
                expansion: Expansion { kernels, terms },
                converged: r.converged,
            })
        }
        Method::SingleGtv | Method::MultiGtv => {
            let refinement = RefinementConfig {
                solver: settings.solver.clone(),
                ..settings.refinement.clone()
            };
            let trace = solve_multigrid(specs, train, lambda, &refinement)?;
            let dict = &trace.dictionary;
            let terms = (0..dict.n_columns())
                .filter(|&j| trace.result.coeffs[j] != 0.0)
                .map(|j| (dict.column_index(j).0, dict.center_of(j).to_vec(), trace.result.coeffs[j]))
                .collect();
            Ok(Fit {
                sparsity: trace.refit.active.len(),
                coeffs: trace.refit.active.iter().map(|&j| trace.refit.coeffs[j]).collect(),
                expansion: Expansion { kernels, terms },
                converged: trace.result.converged,
            })
        }
    }
}

/// How a candidate is picked from the cross-validation scores.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Smallest mean validation error.
    #[default]
    MinError,
    /// Largest λ whose error is within one standard error (over folds) of
    /// the minimum.
    OneStandardError,
}

/// How sorted sites are dealt into cross-validation folds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldScheme {
    /// Consecutive blocks of sorted sites.
    #[default]
    Contiguous,
    /// Site `m` goes to fold `m mod K`.
    Interleaved,
}

/// Validation indices of each fold.
pub fn fold_indices(m: usize, folds: usize, scheme: FoldScheme) -> Result<Vec<Vec<usize>>> {
    let blocks = contiguous_folds(m, folds)?;
    Ok(match scheme {
        FoldScheme::Contiguous => blocks.into_iter().map(|r| r.collect()).collect(),
        FoldScheme::Interleaved => (0..folds).map(|k| (k..m).step_by(folds).collect()).collect(),
    })
}

/// Index ranges of `folds` contiguous blocks over `m` sorted sites.
pub fn contiguous_folds(m: usize, folds: usize) -> Result<Vec<std::ops::Range<usize>>> {
    if folds < 2 {
        return Err(Error::InvalidConfig("cross-validation needs at least two folds".into()));
    }
    if m < folds {
        return Err(Error::InsufficientData(format!("{m} samples cannot fill {folds} folds")));
    }
    Ok((0..folds).map(|k| (k * m / folds)..((k + 1) * m / folds)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CvChoice {
    pub lambda: f64,
    /// Indices into the estimator's kernel list.
    pub kernels: Vec<usize>,
    pub cv_error: f64,
}

/// Mean validation squared error for every candidate, then the minimizer
/// with ties going to the larger λ and then to the earlier candidate.
pub fn cross_validate(
    spec: &EstimatorSpec,
    train: &TrainingSet,
    folds: usize,
    settings: &FitSettings,
) -> Result<CvChoice> {
    spec.validate()?;
    let ranges = fold_indices(train.len(), folds, settings.fold_scheme)?;
    let candidates = spec.candidates();
    if candidates.len() == 1 {
        let (lambda, kernels) = candidates.into_iter().next().expect("one candidate");
        return Ok(CvChoice {
            lambda,
            kernels,
            cv_error: f64::NAN,
        });
    }
    let splits: Vec<(TrainingSet, TrainingSet)> = ranges
        .iter()
        .map(|r| {
            let fit_idx: Vec<usize> = (0..train.len()).filter(|i| !r.contains(i)).collect();
            Ok((train.subset(&fit_idx)?, train.subset(r)?))
        })
        .collect::<Result<_>>()?;

    // (mean validation error, standard error of the fold means)
    let scores: Vec<(f64, f64)> = candidates
        .par_iter()
        .map(|(lambda, subset)| {
            let specs: Vec<KernelSpec> = subset.iter().map(|&k| spec.kernels[k].clone()).collect();
            let mut total = 0.0;
            let mut count = 0usize;
            let mut fold_means = Vec::with_capacity(splits.len());
            for (fit_set, val_set) in &splits {
                let Ok(fit) = fit_method(spec.method, &specs, *lambda, fit_set, settings) else {
                    return (f64::INFINITY, 0.0);
                };
                let mut fold_total = 0.0;
                for m in 0..val_set.len() {
                    let Ok(pred) = fit.expansion.eval(val_set.site(m)) else {
                        return (f64::INFINITY, 0.0);
                    };
                    fold_total += (pred - val_set.targets()[m]).powi(2);
                }
                total += fold_total;
                count += val_set.len();
                fold_means.push(fold_total / val_set.len() as f64);
            }
            (total / count as f64, standard_error(&fold_means))
        })
        .collect();

    let mut best: Option<usize> = None;
    for (i, &(err, _)) in scores.iter().enumerate() {
        if !err.is_finite() {
            continue;
        }
        match best {
            None => best = Some(i),
            Some(b) => {
                let (eb, lb) = (scores[b].0, candidates[b].0);
                if err < eb || (err == eb && candidates[i].0 > lb) {
                    best = Some(i);
                }
            }
        }
    }
    let mut b = best.ok_or_else(|| Error::InsufficientData(format!("{}: every candidate failed", spec.method)))?;
    if settings.selection == SelectionRule::OneStandardError {
        let ceiling = scores[b].0 + scores[b].1;
        for (i, &(err, _)) in scores.iter().enumerate() {
            if err <= ceiling && (candidates[i].0 > candidates[b].0 || (candidates[i].0 == candidates[b].0 && err < scores[b].0)) {
                b = i;
            }
        }
    }
    Ok(CvChoice {
        lambda: candidates[b].0,
        kernels: candidates[b].1.clone(),
        cv_error: scores[b].0,
    })
}

fn standard_error(values: &[f64]) -> f64 {
    let k = values.len();
    if k < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    (var / k as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodReport {
    pub method: Method,
    pub mse: f64,
    pub sparsity: usize,
    pub lambda: f64,
    pub widths: Vec<f64>,
    pub cv_error: f64,
    /// Fitted values on the dense grid.
    pub fitted: Vec<f64>,
    /// The `M` largest coefficient magnitudes, descending.
    pub top_coeffs: Vec<f64>,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodOutcome {
    pub method: Method,
    pub result: std::result::Result<MethodReport, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub task: SyntheticTask,
    pub train: TrainingSet,
    pub dense_x: Vec<f64>,
    pub dense_truth: Vec<f64>,
    pub methods: Vec<MethodOutcome>,
}

impl ExperimentReport {
    pub fn get(&self, method: Method) -> Option<&MethodReport> {
        self.methods
            .iter()
            .find(|o| o.method == method)
            .and_then(|o| o.result.as_ref().ok())
    }

    pub fn failures(&self) -> Vec<(Method, &str)> {
        self.methods
            .iter()
            .filter_map(|o| o.result.as_ref().err().map(|e| (o.method, e.as_str())))
            .collect()
    }

    /// Writes `report.csv`, `fit_<method>.csv` and `coeffs_<method>.csv`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut report = csv::Writer::from_path(dir.join("report.csv"))?;
        report
            .write_record(["method", "mse", "sparsity", "lambda", "widths", "status"])
            ?;
        for outcome in &self.methods {
            match &outcome.result {
                Ok(r) => {
                    let widths: Vec<String> = r.widths.iter().map(|w| fmt17(*w)).collect();
                    report
                        .write_record([
                            r.method.name().to_string(),
                            fmt17(r.mse),
                            r.sparsity.to_string(),
                            fmt17(r.lambda),
                            widths.join(";"),
                            if r.converged { "ok" } else { "not_converged" }.to_string(),
                        ])
                        ?;
                    let mut fit = csv::Writer::from_path(dir.join(format!("fit_{}.csv", r.method.name())))?;
                    fit.write_record(["x", "f_hat", "f_true"])?;
                    for ((x, f), t) in self.dense_x.iter().zip(&r.fitted).zip(&self.dense_truth) {
                        fit.write_record([fmt17(*x), fmt17(*f), fmt17(*t)])?;
                    }
                    fit.flush()?;
                    let mut coeffs =
                        csv::Writer::from_path(dir.join(format!("coeffs_{}.csv", r.method.name())))?;
                    coeffs.write_record(["rank", "abs_coeff"])?;
                    for (rank, c) in r.top_coeffs.iter().enumerate() {
                        coeffs.write_record([(rank + 1).to_string(), fmt17(*c)])?;
                    }
                    coeffs.flush()?;
                }
                Err(e) => {
                    report
                        .write_record([outcome.method.name(), "", "", "", "", &format!("failed: {e}")])
                        ?;
                }
            }
        }
        report.flush()?;
        Ok(())
    }

    /// Plain-text table with one row per method.
    pub fn table(&self) -> String {
        let mut out = format!("{:<12} {:>12} {:>9} {:>12}\n", "method", "mse", "sparsity", "lambda");
        for outcome in &self.methods {
            match &outcome.result {
                Ok(r) => out.push_str(&format!(
                    "{:<12} {:>12.4} {:>9} {:>12.3e}\n",
                    r.method.name(),
                    r.mse,
                    r.sparsity,
                    r.lambda
                )),
                Err(e) => out.push_str(&format!("{:<12} failed: {e}\n", outcome.method.name())),
            }
        }
        out
    }

    pub fn write_table<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.table().as_bytes())?;
        Ok(())
    }
}

/// 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn run_method(spec: &EstimatorSpec, generated: &GeneratedTask, settings: &FitSettings) -> Result<MethodReport> {
    let choice = cross_validate(spec, &generated.train, settings.folds, settings)?;
    let specs: Vec<KernelSpec> = choice.kernels.iter().map(|&k| spec.kernels[k].clone()).collect();
    let fit = fit_method(spec.method, &specs, choice.lambda, &generated.train, settings)?;
    let fitted = fit.expansion.eval_many(&generated.dense_x)?;
    let mse = fitted
        .iter()
        .zip(&generated.dense_truth)
        .map(|(f, t)| (f - t).powi(2))
        .sum::<f64>()
        / fitted.len() as f64;
    let mut top: Vec<f64> = fit.coeffs.iter().map(|c| c.abs()).collect();
    top.sort_by(|a, b| b.total_cmp(a));
    top.truncate(generated.train.len());
    Ok(MethodReport {
        method: spec.method,
        mse,
        sparsity: fit.sparsity,
        lambda: choice.lambda,
        widths: specs.iter().map(|s| s.width()).collect(),
        cv_error: choice.cv_error,
        fitted,
        top_coeffs: top,
        converged: fit.converged,
    })
}

/// Cross-validates, fits and scores every method; a failing method is
/// recorded without stopping the others. Center grids span the task domain
/// unless the settings fix other bounds.
pub fn run_comparison(
    task: &SyntheticTask,
    methods: &[EstimatorSpec],
    settings: &FitSettings,
) -> Result<ExperimentReport> {
    let generated = generate_task(task)?;
    let mut settings = settings.clone();
    if settings.refinement.bounds.is_none() {
        settings.refinement.bounds = Some(vec![task.domain]);
    }
    let settings = &settings;
    let outcomes = methods
        .par_iter()
        .map(|spec| MethodOutcome {
            method: spec.method,
            result: run_method(spec, &generated, settings).map_err(|e| e.to_string()),
        })
        .collect();
    Ok(ExperimentReport {
        task: task.clone(),
        train: generated.train,
        dense_x: generated.dense_x,
        dense_truth: generated.dense_truth,
        methods: outcomes,
    })
}

/// Default estimator list, one per method.
pub fn default_methods() -> Vec<EstimatorSpec> {
    Method::ALL.iter().map(|&m| EstimatorSpec::default_for(m)).collect()
}
