use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sparse-mkr"));
    cmd.env("SPARSE_MKR_THREADS", "1");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records().map(|r| r.unwrap().iter().map(str::to_string).collect()).collect()
}

#[test]
fn kernel_table_bessel_matches_half_exponential() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bessel.csv");
    let o = run(&[
        "kernel-table", "--family", "bessel", "--s", "2", "--gamma", "1", "--range", "5", "--n", "201", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = rows(&out);
    assert_eq!(table.len(), 201);
    for row in table {
        let r: f64 = row[0].parse().unwrap();
        let v: f64 = row[1].parse().unwrap();
        assert!((v - 0.5 * (-r.abs()).exp()).abs() < 1e-6, "r = {r}");
    }
}

#[test]
fn kernel_table_in_two_dimensions_has_three_columns() {
    let o = run(&["kernel-table", "--family", "exp", "--alpha", "1.5", "--dim", "2", "--n", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,x2,value"));
    assert_eq!(lines.count(), 25);
}

#[test]
fn check_exit_codes() {
    let ok = run(&["check", "--family", "exp", "--alpha", "1"]);
    assert_eq!(ok.status.code(), Some(0), "{}{}", stdout(&ok), stderr(&ok));
    let gaussian = run(&["check", "--family", "gaussian"]);
    assert_eq!(gaussian.status.code(), Some(1), "{}", stdout(&gaussian));
    assert!(stdout(&gaussian).contains("heavy"), "{}", stdout(&gaussian));
    let invalid = run(&["check", "--family", "bessel", "--s", "0.5"]);
    assert_eq!(invalid.status.code(), Some(2));
    let unknown = run(&["check", "--family", "cauchy"]);
    assert_eq!(unknown.status.code(), Some(2));
}

fn write_data(dir: &Path) {
    let mut text = String::from("x,y\n");
    for i in 0..15 {
        let x = -1.0 + 2.0 * i as f64 / 14.0;
        text += &format!("{x},{}\n", (3.0 * x).sin());
    }
    fs::write(dir.join("data.csv"), text).unwrap();
}

#[test]
fn fit_gen_lasso_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    write_data(dir.path());
    let config = dir.path().join("fit.toml");
    fs::write(
        &config,
        r#"output = "out"

[data]
csv = "data.csv"

[fit]
method = "gen_lasso"
lambda = 0.05
kernels = [{ family = "exponential", alpha = 2.0, gamma = 4.0 }]
"#,
    )
    .unwrap();
    let o = run(&["fit", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("method: gen_lasso"), "{text}");
    assert!(text.contains("converged: true"), "{text}");
    let coeffs = rows(&dir.path().join("out/coefficients.csv"));
    assert_eq!(coeffs.len(), 15);
    assert!(dir.path().join("out/objective.csv").exists());
}

#[test]
fn fit_multi_gtv_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    write_data(dir.path());
    let config = dir.path().join("fit.toml");
    fs::write(
        &config,
        r#"[data]
csv = "data.csv"

[fit]
method = "multi_gtv"
lambda = 0.1
kernels = [
  { family = "exponential", alpha = 1.99, gamma = 25.0 },
  { family = "exponential", alpha = 1.99, gamma = 2.0 },
]

[refinement]
initial_spacing = 0.2
min_spacing = 0.05
bounds = [[-1.0, 1.0]]
"#,
    )
    .unwrap();
    let out = dir.path().join("elsewhere");
    let o = run(&["fit", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let trace = rows(&out.join("trace.csv"));
    assert!(!trace.is_empty() && trace.len() <= 3);
    let sparsity: usize = stdout(&o)
        .lines()
        .find_map(|l| l.strip_prefix("sparsity: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(sparsity <= 15);
}

#[test]
fn invalid_value_reports_its_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    write_data(dir.path());
    let config = dir.path().join("bad.toml");
    fs::write(
        &config,
        "[data]\ncsv = \"data.csv\"\n\n[fit]\nmethod = \"rkhs_ridge\"\nlambda = -1.0\nkernels = [{ family = \"exponential\", alpha = 2.0, gamma = 1.0 }]\n",
    )
    .unwrap();
    let o = run(&["fit", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("bad.toml:6:"), "{err}");
    assert!(err.contains("fit.lambda"), "{err}");
}

#[test]
fn syntax_and_unknown_keys_report_lines() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("broken.toml");
    fs::write(&config, "[task]\nm = 12\nnoise = 0.5\n").unwrap();
    let o = run(&["compare", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("broken.toml:3:"), "{}", stderr(&o));

    fs::write(&config, "[task]\nm = = 12\n").unwrap();
    let o = run(&["compare", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("broken.toml:2:"), "{}", stderr(&o));
}

#[test]
fn compare_writes_report_for_every_method() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("compare.toml");
    fs::write(
        &config,
        r#"output = "results"

[task]
m = 12
noise_sigma = 0.2

[settings]
folds = 3

[settings.refinement]
initial_spacing = 0.2
min_spacing = 0.05

[[methods]]
method = "rkhs_ridge"
lambdas = [0.01, 1.0]

[[methods]]
method = "gen_lasso"
lambdas = [0.1]

[[methods]]
method = "multi_gtv"
lambdas = [0.1, 1.0]
kernels = [
  { family = "exponential", alpha = 1.99, gamma = 20.0 },
  { family = "exponential", alpha = 1.99, gamma = 2.0 },
]
"#,
    )
    .unwrap();
    let o = run(&["compare", config.to_str().unwrap(), "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = rows(&dir.path().join("results/report.csv"));
    let methods: Vec<&str> = report.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(methods, ["rkhs_ridge", "gen_lasso", "multi_gtv"]);
    assert_eq!(report[0][2], "12");
    for name in methods {
        let fit = rows(&dir.path().join(format!("results/fit_{name}.csv")));
        assert_eq!(fit.len(), 1000);
    }
}
