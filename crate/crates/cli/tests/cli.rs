use std::path::Path;
use std::process::{Command, Output};

use debern::DeconvModel;

fn debern(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_debern"))
        .args(args)
        .current_dir(dir)
        .env_remove("DEBERN_THREADS")
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Low-discrepancy points in (0, 1), one per line.
fn write_unit_sample(path: &Path, n: usize) {
    let golden = 0.618_033_988_749_894_9;
    let rows: String = (1..=n)
        .map(|i| format!("{}\n", (i as f64 * golden).fract()))
        .collect();
    std::fs::write(path, rows).unwrap();
}

fn fit_unit_model(dir: &Path) {
    write_unit_sample(&dir.join("u.csv"), 300);
    let out = debern(
        &["fit", "--input", "u.csv", "--error", "dirac", "--support", "0,1", "--degrees", "2:30"],
        dir,
    );
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn missing_error_sd_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    write_unit_sample(&dir.path().join("u.csv"), 10);
    let out = debern(&["fit", "--input", "u.csv", "--error", "normal"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--error-sd"));
}

#[test]
fn conflicting_error_parameters_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = debern(
        &[
            "fit", "--input", "u.csv", "--error", "uniform", "--error-sd", "1", "--error-halfwidth", "2",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let out = debern(
        &["fit", "--input", "u.csv", "--error", "dirac", "--degrees", "9:3"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fit_writes_model_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    fit_unit_model(dir.path());

    let model = DeconvModel::from_json(&std::fs::read_to_string(dir.path().join("model.json")).unwrap())
        .unwrap();
    assert_eq!(model.support(), (0.0, 1.0));
    assert!((2..=30).contains(&model.degree()));
    assert_eq!(model.n(), 300);

    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("m,loglik,increment,R"));
    assert_eq!(lines.count(), 29);
}

#[test]
fn density_grid_is_reproducible_and_normalized() {
    let dir = tempfile::tempdir().unwrap();
    fit_unit_model(dir.path());
    let args = ["density", "--model", "model.json", "--grid", "512", "--out", "density.csv"];
    assert!(debern(&args, dir.path()).status.success());
    let first = std::fs::read(dir.path().join("density.csv")).unwrap();
    assert!(debern(&args, dir.path()).status.success());
    assert_eq!(first, std::fs::read(dir.path().join("density.csv")).unwrap());

    let text = String::from_utf8(first).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,f_hat,F_hat"));
    let rows: Vec<[f64; 3]> = lines
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
            [v[0], v[1], v[2]]
        })
        .collect();
    assert_eq!(rows.len(), 513);
    assert_eq!(rows[0][0], 0.0);
    assert_eq!(rows[512][0], 1.0);
    assert_eq!(rows[0][2], 0.0);
    assert!((rows[512][2] - 1.0).abs() < 1e-12);
    let trapezoid: f64 = rows
        .windows(2)
        .map(|w| 0.5 * (w[0][1] + w[1][1]) * (w[1][0] - w[0][0]))
        .sum();
    assert!((trapezoid - 1.0).abs() < 1e-4, "{trapezoid}");

    let stdout = debern(&["density", "--model", "model.json", "--grid", "512"], dir.path());
    assert_eq!(stdout.stdout, text.as_bytes());
}

#[test]
fn density_rejects_other_model_versions() {
    let dir = tempfile::tempdir().unwrap();
    fit_unit_model(dir.path());
    let path = dir.path().join("model.json");
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, text.replacen("\"version\": 1", "\"version\": 99", 1)).unwrap();
    let out = debern(&["density", "--model", "model.json"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("version 99"), "{}", stderr(&out));
}

#[test]
fn bad_rows_report_their_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "value\n0.2\n0.4\nn/a\n").unwrap();
    let out = debern(&["fit", "--input", "bad.csv", "--error", "dirac"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("line 4"), "{}", stderr(&out));
    assert!(!dir.path().join("model.json").exists());
}

#[test]
fn too_narrow_support_suggests_widening() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("y.csv"), "0.2\n0.5\n1.7\n0.4\n").unwrap();
    let out = debern(
        &["fit", "--input", "y.csv", "--error", "dirac", "--support", "0,1", "--degrees", "2:5"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("widen --support"), "{}", stderr(&out));
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate", "--scenario", "nn4", "--sigma0", "0.0288675", "--runs", "2", "--seed", "7", "--degrees", "2:12",
    ];
    let a = debern(&args, dir.path());
    let b = debern(&args, dir.path());
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("scenario,estimator,n,sigma0,runs,mise,sqrt_mise_x100,failures\n"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn simulate_rejects_bad_requests() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = debern(&["simulate", "--scenario", "bimodal", "--sigma0", "0.2"], dir.path());
    assert_eq!(unknown.status.code(), Some(2));
    assert!(stderr(&unknown).contains("nn4"));
    let one_run = debern(
        &["simulate", "--scenario", "nn4", "--sigma0", "0.2", "--runs", "1"],
        dir.path(),
    );
    assert_eq!(one_run.status.code(), Some(2));

    let list = debern(&["simulate", "--list-scenarios"], dir.path());
    let names = String::from_utf8(list.stdout).unwrap();
    for name in ["normal-unimodal", "normal-mixture", "nn4"] {
        assert!(names.contains(name));
    }
}
