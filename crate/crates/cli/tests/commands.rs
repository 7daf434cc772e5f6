use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use linmarg::{polynomial_design, Dataset64};
use linmarg_cli::io::{load_dataset, write_dataset};
use linmarg_cli::oracle::gls;
use nalgebra::{DMatrix, DVector};
use serde_json::Value;
use tempfile::TempDir;

const EX1_MAP: [f64; 3] = [-2.700_113_698_642_429, 1.753_042_168_246_784, 14.090_693_889_744_91];
const EX1_LOG_MARGINAL: f64 = -13.984_455_955_254_761;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn linmarg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_linmarg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = linmarg(args);
    assert!(
        out.status.success(),
        "{args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

/// Header and numeric rows of a CSV file.
fn table(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|f| f.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn fit_exercise1(out: &Path, extra: &[&str]) -> Output {
    let data = fixture("exercise1.csv");
    let mut args = vec!["fit-linear", "--data", p(&data), "--out", p(out)];
    args.extend_from_slice(extra);
    linmarg(&args)
}

const EX1_PRIOR: [&str; 4] = ["--prior-mean", "1,3,9", "--prior-var", "25,4,64"];

#[test]
fn fit_linear_reproduces_exercise_one() {
    let dir = TempDir::new().unwrap();
    let out = fit_exercise1(dir.path(), &EX1_PRIOR);
    assert!(out.status.success(), "{}", stderr(&out));

    let report = json(&dir.path().join("posterior.json"));
    assert_eq!(report["command"], "fit-linear");
    let o = &report["outputs"];
    for (got, want) in floats(&o["mean"]).iter().zip(EX1_MAP) {
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
    assert_eq!(o["log_marginal"]["status"], "defined");
    assert!((o["log_marginal"]["value"].as_f64().unwrap() - EX1_LOG_MARGINAL).abs() < 1e-9);
    assert_eq!(o["evaluation_space"], "parameter");
    assert_eq!(o["column_names"], serde_json::json!(["x^2", "x", "1"]));
    assert_eq!(report["inputs"]["files"][0]["role"], "data");
    assert!(!dir.path().join("samples.csv").exists());

    let (header, rows) = table(&dir.path().join("fit_curve.csv"));
    assert_eq!(header, ["x", "map", "lower", "upper"]);
    assert_eq!(rows.len(), 256);
    for r in &rows {
        assert!(r[2] < r[1] && r[1] < r[3], "band {r:?}");
    }
}

#[test]
fn full_covariance_file_matches_variance_list() {
    let dir = TempDir::new().unwrap();
    let cov = dir.path().join("prior_cov.csv");
    fs::write(&cov, "25,0,0\n0,4,0\n0,0,64\n").unwrap();
    let out_dir = dir.path().join("fit");
    let out = fit_exercise1(&out_dir, &["--prior-mean", "1,3,9", "--prior-var", p(&cov)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = json(&out_dir.join("posterior.json"));
    for (got, want) in floats(&report["outputs"]["mean"]).iter().zip(EX1_MAP) {
        assert!((got - want).abs() < 1e-9);
    }
    let roles: Vec<&str> = report["inputs"]["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["role"].as_str().unwrap())
        .collect();
    assert_eq!(roles, ["data", "prior_covariance"]);
}

#[test]
fn improper_prior_gives_gls_and_undefined_marginal() {
    let dir = TempDir::new().unwrap();
    let out = fit_exercise1(dir.path(), &["--improper-prior"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let o = json(&dir.path().join("posterior.json"))["outputs"].clone();
    assert_eq!(o["log_marginal"], serde_json::json!({ "status": "undefined" }));

    let data = load_dataset(&fixture("exercise1.csv")).unwrap();
    let design = polynomial_design(data.x(), 2).unwrap();
    let cov = DMatrix::from_diagonal(&data.sigma_y().map(|s| s * s));
    let want = gls(&design, &cov, data.y());
    for (got, want) in floats(&o["mean"]).iter().zip(want.iter()) {
        assert!((got - want).abs() <= 1e-8 * want.abs().max(1.0), "{got} vs {want}");
    }
}

#[test]
fn fit_samples_are_deterministic() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let extra: Vec<&str> = EX1_PRIOR
        .iter()
        .copied()
        .chain(["--samples", "4096", "--seed", "7"])
        .collect();
    for dir in [&a, &b] {
        let out = fit_exercise1(dir.path(), &extra);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    for name in ["samples.csv", "fit_curve.csv"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
    let outputs = |d: &TempDir| json(&d.path().join("posterior.json"))["outputs"].clone();
    assert_eq!(outputs(&a), outputs(&b));
    let (header, rows) = table(&a.path().join("samples.csv"));
    assert_eq!(header, ["theta_1", "theta_2", "theta_3"]);
    assert_eq!(rows.len(), 4096);

    let c = TempDir::new().unwrap();
    let extra: Vec<&str> = EX1_PRIOR
        .iter()
        .copied()
        .chain(["--samples", "4096", "--seed", "8"])
        .collect();
    fit_exercise1(c.path(), &extra);
    assert_ne!(
        fs::read(a.path().join("samples.csv")).unwrap(),
        fs::read(c.path().join("samples.csv")).unwrap()
    );
}

fn scan_args<'a>(data: &'a str, out: &'a str, grid: &'a str) -> Vec<&'a str> {
    vec![
        "scan-frequency",
        "--data",
        data,
        "--prior-mean",
        "0,0,0",
        "--prior-var",
        "25,25,100",
        "--grid",
        grid,
        "--out",
        out,
    ]
}

#[test]
fn scan_grid_endpoints_and_spacing() {
    let data = fixture("exercise2.csv");
    let dir = TempDir::new().unwrap();
    run_ok(&scan_args(p(&data), p(dir.path()), "2"));
    let (header, rows) = table(&dir.path().join("scan.csv"));
    assert_eq!(
        header,
        [
            "omega",
            "log_marginal",
            "log_prior",
            "log_post_unnorm",
            "marginal_rescaled",
            "post_rescaled"
        ]
    );
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], 0.1);
    assert_eq!(rows[1][0], 100.0);

    let dir = TempDir::new().unwrap();
    run_ok(&scan_args(p(&data), p(dir.path()), "16384"));
    let (_, rows) = table(&dir.path().join("scan.csv"));
    assert_eq!(rows.len(), 16384);
    for (g, r) in rows.iter().enumerate() {
        let want = 0.1 * 1000f64.powf(g as f64 / 16383.0);
        assert!((r[0] - want).abs() <= 1e-12 * want, "row {g}: {} vs {want}", r[0]);
        assert!(r[4] <= 1.0 && r[5] <= 1.0);
    }
    for col in [4, 5] {
        assert_eq!(rows.iter().map(|r| r[col]).fold(0.0, f64::max), 1.0);
    }
    let summary = json(&dir.path().join("scan.json"))["outputs"].clone();
    assert_eq!(summary["grid_points"], 16384);
}

#[test]
fn thread_count_does_not_change_scan() {
    let data = fixture("exercise2.csv");
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    run_ok(&scan_args(p(&data), p(a.path()), "4096"));
    let out = Command::new(env!("CARGO_BIN_EXE_linmarg"))
        .args(scan_args(p(&data), p(b.path()), "4096"))
        .env("LINMARG_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(
        fs::read(a.path().join("scan.csv")).unwrap(),
        fs::read(b.path().join("scan.csv")).unwrap()
    );
}

fn sample_args<'a>(data: &'a str, out: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut args = vec![
        "sample",
        "--data",
        data,
        "--prior-mean",
        "0,0,0",
        "--prior-var",
        "25,25,100",
        "--out",
        out,
    ];
    args.extend_from_slice(extra);
    args
}

#[test]
fn sample_exercise_two() {
    let data = fixture("exercise2.csv");
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for dir in [&a, &b] {
        run_ok(&sample_args(
            p(&data),
            p(dir.path()),
            &["--samples", "512", "--seed", "3"],
        ));
    }
    let (header, rows) = table(&a.path().join("joint_samples.csv"));
    assert_eq!(header, ["alpha", "beta", "gamma", "omega"]);
    assert_eq!(rows.len(), 512);
    assert!(rows.iter().all(|r| r[3] > 0.1 && r[3] < 100.0));

    let (header, proj) = table(&a.path().join("projection.csv"));
    assert_eq!(header, ["alpha", "ln_omega"]);
    for (r, q) in rows.iter().zip(&proj) {
        assert_eq!(r[0], q[0]);
        assert!((q[1] - r[3].ln()).abs() < 1e-15);
    }

    let (header, curves) = table(&a.path().join("curves.csv"));
    assert_eq!(header, ["curve_id", "sample_index", "x", "y"]);
    let mut ids: Vec<i64> = curves.iter().map(|r| r[0] as i64).collect();
    ids.dedup();
    assert_eq!(ids, (0..64).collect::<Vec<_>>());
    assert_eq!(curves.len(), 64 * 256);

    for name in ["joint_samples.csv", "projection.csv", "curves.csv"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
    let o = json(&a.path().join("sample.json"))["outputs"].clone();
    assert_eq!(o["samples"], 512);
    assert!(o["acceptance_rate"].as_f64().unwrap() > 0.0);
}

#[test]
fn zero_sigma_is_a_validation_error_naming_the_row() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "x,y,sigma_y\n1,2,0.5\n2,3,0\n3,4,0.5\n").unwrap();
    let out = linmarg(&[
        "fit-linear",
        "--data",
        p(&data),
        "--out",
        p(&dir.path().join("o")),
        "--improper-prior",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("row 2"), "{}", stderr(&out));
}

#[test]
fn parse_error_reports_line_and_column() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "x,y,sigma_y\n1,2,0.5\n2,oops,0.5\n").unwrap();
    let out = linmarg(&[
        "fit-linear",
        "--data",
        p(&data),
        "--out",
        p(&dir.path().join("o")),
        "--improper-prior",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("line 3") && err.contains("column 2"), "{err}");
}

#[test]
fn exhausted_proposal_budget_is_an_envelope_error() {
    let data = fixture("exercise2.csv");
    let dir = TempDir::new().unwrap();
    let out = linmarg(&sample_args(
        p(&data),
        p(dir.path()),
        &["--grid", "512", "--max-proposals", "10"],
    ));
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("acceptance rate"), "{}", stderr(&out));
}

#[test]
fn singular_posterior_is_a_numerical_error() {
    let dir = TempDir::new().unwrap();
    let out = fit_exercise1(dir.path(), &["--degree", "5", "--improper-prior"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn bad_arguments_exit_with_two() {
    assert_eq!(linmarg(&["fit-linear"]).status.code(), Some(2));
    let dir = TempDir::new().unwrap();
    let out = fit_exercise1(dir.path(), &["--degree", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = fit_exercise1(dir.path(), &["--prior-mean", "1,2", "--prior-var", "1,1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(linmarg(&["--help"]).status.code(), Some(0));
}

#[test]
fn verify_passes_and_detects_a_corrupted_fixture() {
    let out = run_ok(&["verify", "--cases", "0"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("checks passed"));

    let dir = TempDir::new().unwrap();
    for name in ["exercise1.csv", "exercise2.csv"] {
        fs::copy(fixture(name), dir.path().join(name)).unwrap();
    }
    let mut expected = json(&fixture("exercise1_expected.json"));
    expected["map"][0] = serde_json::json!(3.61);
    fs::write(dir.path().join("exercise1_expected.json"), expected.to_string()).unwrap();
    let out = linmarg(&["verify", "--cases", "0", "--fixtures", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("exercise-1"), "{}", stderr(&out));
}

#[test]
fn dataset_round_trips_through_csv() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("d.csv");
    let data = Dataset64::new(
        DVector::from_vec(vec![0.1, 1.0 / 3.0, -2.5e-8]),
        DVector::from_vec(vec![std::f64::consts::PI, -1e300, 7.0]),
        DVector::from_vec(vec![0.2, 1e-5, 3.0]),
    )
    .unwrap();
    write_dataset(&path, &data).unwrap();
    assert_eq!(load_dataset(&path).unwrap(), data);
}
