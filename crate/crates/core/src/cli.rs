//! Command-line front end.
//!
//! Exit codes: 0 success, 1 kernel not admissible (`check`), 2 invalid input
//! or configuration, 3 solver or method failure (outputs still written).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::dictionary::{assemble_design, assemble_gram, CenterGrid, TrainingSet};
use crate::experiments::{
    generate_task, run_comparison, EstimatorSpec, FitSettings, Method, SyntheticTask,
};
use crate::kernels::{check_admissibility, KernelSpec, ProbeConfig};
use crate::multigrid::{solve_multigrid, RefinementConfig};
use crate::solvers::{
    active_set, debias, ridge_objective, solve_lasso, solve_mkl, solve_ridge, MklConfig, SolverConfig,
};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INADMISSIBLE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_FAILED: i32 = 3;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "SPARSE_MKR_THREADS";

#[derive(Debug, Parser)]
#[command(name = "sparse-mkr", version, about = "Sparse multiple-kernel regression toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a kernel on a uniform grid of offsets and write CSV.
    KernelTable(KernelTableArgs),
    /// Run the numerical admissibility check on a kernel.
    Check(CheckArgs),
    /// Fit one estimator described by a TOML config.
    Fit(ConfigArgs),
    /// Run the five-estimator comparison described by a TOML config.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    #[value(alias = "exponential")]
    Exp,
    Gaussian,
    Bessel,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    /// Exponent of the exponential family.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub gamma: f64,
    /// Order of the Bessel potential.
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    pub s: f64,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
}

impl KernelArgs {
    pub fn spec(&self) -> Result<KernelSpec> {
        match self.family {
            FamilyArg::Exp => KernelSpec::exponential(self.alpha, self.gamma, self.dim),
            FamilyArg::Gaussian => KernelSpec::gaussian(self.gamma, self.dim),
            FamilyArg::Bessel => KernelSpec::bessel(self.s, self.gamma, self.dim),
        }
    }
}

#[derive(Debug, Args)]
pub struct KernelTableArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Offsets run over `[-range, range]` on every axis.
    #[arg(long, default_value_t = 5.0)]
    pub range: f64,
    /// Samples per axis.
    #[arg(long, default_value_t = 101)]
    pub n: usize,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Probe radii `[r1, r2]`; defaults scale with the kernel width.
    #[arg(long, num_args = 2, value_names = ["R1", "R2"])]
    pub radius_range: Option<Vec<f64>>,
    /// Probe frequencies `[w1, w2]`; defaults scale with the kernel width.
    #[arg(long, num_args = 2, value_names = ["W1", "W2"])]
    pub frequency_range: Option<Vec<f64>>,
    #[arg(long)]
    pub slope_cap: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    pub config: PathBuf,
    /// Overrides the output directory named in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Config file; built-in defaults when omitted.
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Messages go to `out` and `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    configure_threads();
    let outcome = match &cli.command {
        Command::KernelTable(a) => kernel_table(a, out),
        Command::Check(a) => check(a, out),
        Command::Fit(a) => fit(a, out),
        Command::Compare(a) => compare(a, out),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NotConverged { .. }
        | Error::SingularSystem
        | Error::RankDeficientSupport { .. }
        | Error::ResolutionTooCoarse { .. }
        | Error::TableMissing { .. } => EXIT_FAILED,
        _ => EXIT_INVALID,
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            // a second call in the same process keeps the first pool
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn kernel_table(args: &KernelTableArgs, out: &mut dyn Write) -> Result<i32> {
    let spec = args.kernel.spec()?;
    if !(args.range.is_finite() && args.range > 0.0) {
        return Err(Error::InvalidConfig("range must be positive".into()));
    }
    if args.n < 2 {
        return Err(Error::InvalidConfig("n must be at least 2".into()));
    }
    let kernel = spec.compile()?;
    let axis: Vec<f64> = (0..args.n)
        .map(|i| -args.range + 2.0 * args.range * i as f64 / (args.n - 1) as f64)
        .collect();
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        match spec.dim {
            1 => {
                w.write_record(["r", "value"])?;
                for &r in &axis {
                    w.write_record([fmt17(r), fmt17(kernel.eval_offset(&[r])?)])?;
                }
            }
            2 => {
                w.write_record(["x1", "x2", "value"])?;
                for &x1 in &axis {
                    for &x2 in &axis {
                        w.write_record([fmt17(x1), fmt17(x2), fmt17(kernel.eval_offset(&[x1, x2])?)])?;
                    }
                }
            }
            d => return Err(Error::InvalidConfig(format!("kernel tables cover d ∈ {{1, 2}}, got {d}"))),
        }
        w.flush()?;
    }
    match &args.out {
        Some(path) => fs::write(path, &buf)?,
        None => out.write_all(&buf)?,
    }
    Ok(EXIT_OK)
}

fn check(args: &CheckArgs, out: &mut dyn Write) -> Result<i32> {
    let spec = args.kernel.spec()?;
    let mut probe = ProbeConfig::scaled(spec.width());
    if let Some(r) = &args.radius_range {
        probe.radius_range = (r[0], r[1]);
    }
    if let Some(w) = &args.frequency_range {
        probe.frequency_range = (w[0], w[1]);
    }
    if let Some(c) = args.slope_cap {
        probe.slope_cap = c;
    }
    let report = check_admissibility(&spec, &probe)?;
    write!(out, "{report}")?;
    Ok(if report.admissible { EXIT_OK } else { EXIT_INADMISSIBLE })
}

/// Where a training set comes from.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// CSV with coordinate columns then a target column, relative to the
    /// config file.
    pub csv: Option<PathBuf>,
    pub task: Option<SyntheticTask>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub method: Method,
    pub lambda: f64,
    pub kernels: Vec<KernelSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default = "default_fit_output")]
    pub output: PathBuf,
    pub data: DataSection,
    pub fit: FitSection,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub refinement: RefinementConfig,
    #[serde(default)]
    pub mkl: MklConfig,
    #[serde(default = "default_eta")]
    pub mkl_eta: f64,
}

fn default_fit_output() -> PathBuf {
    PathBuf::from("fit_output")
}

fn default_compare_output() -> PathBuf {
    PathBuf::from("compare_output")
}

fn default_eta() -> f64 {
    1e-3
}

/// One `[[methods]]` entry; omitted grids take the method defaults.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodEntry {
    pub method: Method,
    pub kernels: Option<Vec<KernelSpec>>,
    pub lambdas: Option<Vec<f64>>,
}

impl MethodEntry {
    pub fn estimator(&self) -> EstimatorSpec {
        let base = EstimatorSpec::default_for(self.method);
        EstimatorSpec {
            method: self.method,
            kernels: self.kernels.clone().unwrap_or(base.kernels),
            lambdas: self.lambdas.clone().unwrap_or(base.lambdas),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_compare_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub task: SyntheticTask,
    #[serde(default)]
    pub settings: FitSettings,
    /// All five methods with default grids when omitted.
    pub methods: Option<Vec<MethodEntry>>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            output: default_compare_output(),
            task: SyntheticTask::default(),
            settings: FitSettings::default(),
            methods: None,
        }
    }
}

impl ExperimentConfig {
    pub fn estimators(&self) -> Vec<EstimatorSpec> {
        match &self.methods {
            Some(entries) => entries.iter().map(MethodEntry::estimator).collect(),
            None => crate::experiments::default_methods(),
        }
    }
}

/// 1-based line of byte `offset` in `text`.
fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// 1-based line holding the first assignment to `key` after the header of
/// `section` (or anywhere when the section is not found).
fn line_of_key(text: &str, section: &str, key: &str) -> usize {
    let mut in_section = section.is_empty();
    let mut fallback = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            let name = line.trim_matches(|c| c == '[' || c == ']').trim();
            in_section = name == section;
            continue;
        }
        let assigns = line
            .strip_prefix(key)
            .is_some_and(|rest| rest.trim_start().starts_with('='));
        if assigns {
            if in_section {
                return i + 1;
            }
            fallback.get_or_insert(i + 1);
        }
    }
    fallback.unwrap_or(1)
}

fn config_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Reads and deserializes a TOML document, reporting the line of any syntax
/// or type error.
pub fn load_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<(T, String)> {
    let text = fs::read_to_string(path)?;
    match toml::from_str::<T>(&text) {
        Ok(v) => Ok((v, text)),
        Err(e) => {
            let line = e.span().map_or(1, |s| line_at(&text, s.start));
            Err(config_error(path, line, e.message().to_string()))
        }
    }
}

/// Checks values that deserialize but are out of range, naming the field.
fn validate_fit(config: &FitConfig, text: &str, path: &Path) -> Result<()> {
    let field = |section: &str, key: &str, e: Error| {
        let name = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
        config_error(path, line_of_key(text, section, key), format!("{name}: {e}"))
    };
    if !(config.fit.lambda.is_finite() && config.fit.lambda >= 0.0) {
        return Err(field(
            "fit",
            "lambda",
            Error::InvalidConfig(format!("must be ≥ 0, got {}", config.fit.lambda)),
        ));
    }
    if config.fit.kernels.is_empty() {
        return Err(field("fit", "kernels", Error::InvalidConfig("at least one kernel is required".into())));
    }
    for k in &config.fit.kernels {
        k.validate().map_err(|e| field("fit", "kernels", e))?;
    }
    let multi = config.fit.method.is_multi_kernel();
    if multi && config.fit.kernels.len() < 2 {
        return Err(field("fit", "kernels", Error::InvalidConfig(format!("{} needs at least two kernels", config.fit.method))));
    }
    if !multi && !config.fit.method.is_gtv() && config.fit.kernels.len() != 1 {
        return Err(field("fit", "kernels", Error::InvalidConfig(format!("{} takes exactly one kernel", config.fit.method))));
    }
    let solver = SolverConfig {
        lambda: config.fit.lambda,
        ..config.solver.clone()
    };
    solver.validate().map_err(|e| field("solver", "max_iters", e))?;
    if config.fit.method.is_gtv() {
        config.refinement.validate().map_err(|e| field("refinement", "min_spacing", e))?;
    }
    if !(config.mkl_eta.is_finite() && config.mkl_eta >= 0.0) {
        return Err(field("", "mkl_eta", Error::InvalidConfig("must be ≥ 0".into())));
    }
    match (&config.data.csv, &config.data.task) {
        (Some(_), None) | (None, Some(_)) => Ok(()),
        _ => Err(field(
            "data",
            "csv",
            Error::InvalidConfig("give exactly one of `csv` or `[data.task]`".into()),
        )),
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(p)
    }
}

struct FitSummary {
    objective: f64,
    iterations: usize,
    sparsity: usize,
    kkt: Option<f64>,
    converged: bool,
}

fn write_objective_trace(path: &Path, trace: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "objective"])?;
    for (i, f) in trace.iter().enumerate() {
        w.write_record([i.to_string(), fmt17(*f)])?;
    }
    w.flush()?;
    Ok(())
}

fn sites_grid(train: &TrainingSet) -> Result<CenterGrid> {
    let sites: Vec<f64> = train.sites().flat_map(|s| s.iter().copied()).collect();
    CenterGrid::from_centers(train.dim(), sites, 1.0, train.bounding_box())
}

fn fit(args: &ConfigArgs, out: &mut dyn Write) -> Result<i32> {
    let (config, text): (FitConfig, String) = load_toml(&args.config)?;
    validate_fit(&config, &text, &args.config)?;
    let train = match (&config.data.csv, &config.data.task) {
        (Some(csv), _) => TrainingSet::from_csv_path(&resolve(&args.config, csv))?,
        (None, Some(task)) => generate_task(task)?.train,
        (None, None) => unreachable!("validated"),
    };
    let output = args.out.clone().unwrap_or_else(|| resolve(&args.config, &config.output));
    fs::create_dir_all(&output)?;
    let lambda = config.fit.lambda;
    let specs = &config.fit.kernels;
    let y = train.targets();

    let summary = match config.fit.method {
        Method::SingleGtv | Method::MultiGtv => {
            let refinement = RefinementConfig {
                solver: config.solver.clone(),
                ..config.refinement.clone()
            };
            let trace = solve_multigrid(specs, &train, lambda, &refinement)?;
            trace.write_csv(fs::File::create(output.join("trace.csv"))?)?;
            trace
                .dictionary
                .write_coefficients_csv(&trace.result.coeffs, fs::File::create(output.join("coefficients.csv"))?)?;
            trace
                .dictionary
                .write_coefficients_csv(&trace.refit.coeffs, fs::File::create(output.join("refit.csv"))?)?;
            write_objective_trace(&output.join("objective.csv"), &trace.result.objective_trace)?;
            if trace.empty_model {
                writeln!(out, "empty model: every coefficient is zero")?;
            }
            FitSummary {
                objective: trace.objective(),
                iterations: trace.result.iterations,
                sparsity: trace.refit.active.len(),
                kkt: Some(trace.result.kkt_residual),
                converged: trace.result.converged,
            }
        }
        Method::GenLasso => {
            let kernel = specs[0].compile()?;
            let dict = assemble_design(std::slice::from_ref(&kernel), &[sites_grid(&train)?], &train)?;
            let solver = SolverConfig {
                lambda,
                ..config.solver.clone()
            };
            let result = solve_lasso(dict.design(), y, &solver)?;
            let refit = debias(dict.design(), y, &result.coeffs)?;
            dict.write_coefficients_csv(&result.coeffs, fs::File::create(output.join("coefficients.csv"))?)?;
            dict.write_coefficients_csv(&refit.coeffs, fs::File::create(output.join("refit.csv"))?)?;
            write_objective_trace(&output.join("objective.csv"), &result.objective_trace)?;
            FitSummary {
                objective: result.objective(),
                iterations: result.iterations,
                sparsity: refit.active.len(),
                kkt: Some(result.kkt_residual),
                converged: result.converged,
            }
        }
        Method::RkhsRidge => {
            let kernel = specs[0].compile()?;
            let gram = assemble_gram(&kernel, &train)?;
            let a = solve_ridge(&gram, y, lambda)?;
            let dict = assemble_design(std::slice::from_ref(&kernel), &[sites_grid(&train)?], &train)?;
            dict.write_coefficients_csv(&a, fs::File::create(output.join("coefficients.csv"))?)?;
            let gradient = (&gram * ((&gram * &a - y) + &a * lambda)) * 2.0;
            FitSummary {
                objective: ridge_objective(&gram, y, lambda, &a),
                iterations: 1,
                sparsity: active_set(&a).len(),
                kkt: Some(gradient.amax()),
                converged: true,
            }
        }
        Method::MklRidge => {
            let kernels = specs.iter().map(|s| s.compile()).collect::<Result<Vec<_>>>()?;
            let grams = kernels.iter().map(|k| assemble_gram(k, &train)).collect::<Result<Vec<_>>>()?;
            let r = solve_mkl(&grams, y, lambda, config.mkl_eta, &config.mkl)?;
            let dict = assemble_design(&kernels[..1], &[sites_grid(&train)?], &train)?;
            dict.write_coefficients_csv(&r.coeffs, fs::File::create(output.join("coefficients.csv"))?)?;
            let mut w = csv::Writer::from_path(output.join("weights.csv"))?;
            w.write_record(["kernel", "mu"])?;
            for (n, mu) in r.mu.iter().enumerate() {
                w.write_record([n.to_string(), fmt17(*mu)])?;
            }
            w.flush()?;
            write_objective_trace(&output.join("objective.csv"), &r.objective_trace)?;
            FitSummary {
                objective: r.objective,
                iterations: r.outer_iterations,
                sparsity: active_set(&r.coeffs).len(),
                kkt: None,
                converged: r.converged,
            }
        }
    };

    writeln!(out, "method: {}", config.fit.method)?;
    writeln!(out, "samples: {}", train.len())?;
    writeln!(out, "objective: {}", fmt17(summary.objective))?;
    writeln!(out, "iterations: {}", summary.iterations)?;
    writeln!(out, "sparsity: {}", summary.sparsity)?;
    match summary.kkt {
        Some(k) => writeln!(out, "kkt_residual: {}", fmt17(k))?,
        None => writeln!(out, "kkt_residual: n/a")?,
    }
    writeln!(out, "converged: {}", summary.converged)?;
    writeln!(out, "output: {}", output.display())?;
    Ok(if summary.converged { EXIT_OK } else { EXIT_FAILED })
}

fn compare(args: &CompareArgs, out: &mut dyn Write) -> Result<i32> {
    let mut config = match &args.config {
        Some(path) => {
            let (mut config, text): (ExperimentConfig, String) = load_toml(path)?;
            let located = |section: &str, key: &str, e: Error| {
                config_error(path, line_of_key(&text, section, key), format!("{section}.{key}: {e}"))
            };
            config.task.validate().map_err(|e| located("task", "knots", e))?;
            for est in config.estimators() {
                est.validate().map_err(|e| located("methods", "method", e))?;
            }
            if config.settings.folds < 2 {
                return Err(located("settings", "folds", Error::InvalidConfig("at least two folds".into())));
            }
            config.output = resolve(path, &config.output);
            config
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.task.seed = seed;
    }
    let output = args.out.clone().unwrap_or(config.output.clone());
    let report = run_comparison(&config.task, &config.estimators(), &config.settings)?;
    report.write_dir(&output)?;
    report.write_table(&mut *out)?;
    writeln!(out, "output: {}", output.display())?;
    let not_converged = report
        .methods
        .iter()
        .any(|o| o.result.as_ref().is_ok_and(|r| !r.converged));
    Ok(if report.failures().is_empty() && !not_converged { EXIT_OK } else { EXIT_FAILED })
}

/// Entry point used by the binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(args, &mut stdout.lock(), &mut stderr.lock())
}
