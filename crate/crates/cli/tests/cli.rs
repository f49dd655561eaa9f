use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dfsvm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfsvm")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(false).from_path(path).unwrap();
    rd.records().map(|r| r.unwrap().iter().map(str::to_string).collect()).collect()
}

fn simulate_into(dir: &Path, variant: &str, p: usize, n: usize, seed: &str) {
    let cfg = write_config(
        dir,
        "sim.json",
        &format!(r#"{{"model": {{"variant": "{variant}", "q": 1, "lags": 1}}, "simulate": {{"p": {p}, "n": {n}}}}}"#),
    );
    let out = dfsvm(&["simulate", "--config", &cfg, "--seed", seed, "--out-dir", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_is_deterministic_and_shaped() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    simulate_into(a.path(), "DFSVML", 2, 50, "7");
    simulate_into(b.path(), "DFSVML", 2, 50, "7");
    for f in ["y.csv", "latents.csv", "params.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let rows = csv_rows(&a.path().join("y.csv"));
    assert_eq!(rows.len(), 51);
    assert!(rows.iter().all(|r| r.len() == 3));
}

#[test]
fn invalid_factor_count_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{"model": {"variant": "DFSVM", "q": 2, "lags": 1}, "simulate": {"p": 2, "n": 50}}"#,
    );
    let out = dfsvm(&["simulate", "--config", &cfg, "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", r#"{"chian": {}}"#);
    let out = dfsvm(&["fit", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"data": {"path": "/nonexistent/panel.csv"}}"#);
    let out = dfsvm(&["fit", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(4));
}

fn fit_summary(dir: &Path, variant: &str) -> Vec<Vec<String>> {
    simulate_into(dir, "DFSVML", 3, 60, "3");
    let cfg = write_config(
        dir,
        "fit.json",
        &format!(
            r#"{{"model": {{"variant": "{variant}", "q": 1, "lags": 1}},
                "chain": {{"n_draws": 120, "n_burnin": 20}},
                "data": {{"path": "{}"}},
                "forecast": {{"horizon": 3}}}}"#,
            dir.join("y.csv").display()
        ),
    );
    let out = dfsvm(&["fit", "--config", &cfg, "--out-dir", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    csv_rows(&dir.join("summary.csv"))
}

#[test]
fn fit_summary_is_finite_and_follows_variant() {
    let dir = tempfile::tempdir().unwrap();
    let rows = fit_summary(dir.path(), "DFSVML");
    assert_eq!(rows[0][..5], ["parameter", "mean", "q025", "q975", "prob_positive"]);
    for r in &rows[1..] {
        for v in &r[1..5] {
            assert!(v.parse::<f64>().unwrap().is_finite(), "{r:?}");
        }
    }
    assert!(rows.iter().any(|r| r[0].starts_with("beta")));

    let dir = tempfile::tempdir().unwrap();
    let rows = fit_summary(dir.path(), "DFSV");
    assert!(!rows.iter().any(|r| r[0].starts_with("beta")));
}

#[test]
fn forecast_and_report_from_saved_draws() {
    let dir = tempfile::tempdir().unwrap();
    fit_summary(dir.path(), "DFSVM");
    let d = dir.path();
    let cfg = write_config(
        d,
        "fc.json",
        &format!(
            r#"{{"model": {{"variant": "DFSVM", "q": 1, "lags": 1}},
                "data": {{"path": "{}"}},
                "forecast": {{"horizon": 3, "draws": "{}"}}}}"#,
            d.join("y.csv").display(),
            d.join("draws.json").display()
        ),
    );
    let out = dfsvm(&["forecast", "--config", &cfg, "--out-dir", d.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&d.join("forecast.csv"));
    assert_eq!(rows.len(), 1 + 3 * 3);
    assert!(rows[1..].iter().all(|r| r[3].parse::<f64>().unwrap().is_finite()));
    let out = dfsvm(&["report", "--config", &cfg, "--out-dir", d.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("DFSVM"));
}

#[test]
fn backtest_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate_into(d, "DFSVM", 2, 40, "5");
    let cfg = write_config(
        d,
        "bt.json",
        &format!(
            r#"{{"model": {{"variant": "DFSVM", "q": 1, "lags": 1}},
                "chain": {{"n_draws": 40, "n_burnin": 10}},
                "data": {{"path": "{}"}},
                "backtest": {{"first_origin": "1968Q1", "max_horizon": 2}}}}"#,
            d.join("y.csv").display()
        ),
    );
    let out = dfsvm(&["backtest", "--config", &cfg, "--out-dir", d.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&d.join("forecasts.csv"));
    assert_eq!(rows[0], ["origin", "horizon", "variable", "point", "realized", "sq_error", "log_pred_density"]);
    // 1968Q1..1969Q3 are 7 origins; the last one scores only horizon 1
    assert_eq!(rows.len() - 1, 2 * (6 * 2 + 1));

    let fc = d.join("forecasts.csv");
    let ev = write_config(
        d,
        "ev.json",
        &format!(
            r#"{{"evaluate": {{"results": {{"A": "{0}", "B": "{0}"}}, "benchmark": "B", "n_boot": 200}}}}"#,
            fc.display()
        ),
    );
    let out_dir = d.join("eval");
    let out = dfsvm(&["evaluate", "--config", &ev, "--out-dir", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for r in &csv_rows(&out_dir.join("gains_h1.csv"))[1..] {
        assert!(r[1..].iter().all(|v| v.parse::<f64>().unwrap() == 0.0), "{r:?}");
    }
    for r in &csv_rows(&out_dir.join("mcs_sfe.csv"))[1..] {
        assert_eq!(r[4], "true");
    }

    let ev = write_config(
        d,
        "ev2.json",
        &format!(r#"{{"evaluate": {{"results": {{"A": "{}"}}, "benchmark": "LSVVAR"}}}}"#, fc.display()),
    );
    let out = dfsvm(&["evaluate", "--config", &ev, "--out-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("LSVVAR"));
}
