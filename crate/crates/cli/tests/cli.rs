use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn convlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_convlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.json");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn empty_run_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("reports");
    let o = convlab(&["--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_seed_is_a_config_error() {
    let o = convlab(&["--scenario", "BIN2POIS"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn unknown_scenario_is_a_config_error() {
    let o = convlab(&["--seed", "1", "--scenario", "NOPE"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn probabilities_must_sum_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"scenarios": [{"id": "MULTINOM_CLT", "params": {"p": [0.2, 0.3, 0.4]}}], "mc": {"seed": 3}}"#,
    );
    let out = dir.path().join("reports");
    let o = convlab(&["--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"mc": {"seed": 3, "sedd": 4}}"#);
    assert_eq!(code(&convlab(&["--config", &cfg])), 2);
}

#[test]
fn list_is_sorted_and_stable() {
    let a = convlab(&["--list"]);
    let b = convlab(&["--list"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let ids: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with(' '))
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
    assert_eq!(ids.len(), 13);
    for id in ["EVT_FRECHET", "EVT_GUMBEL", "EVT_WEIBULL"] {
        assert!(ids.contains(&id), "{id} missing");
    }
    // every id carries a quoted anchor phrase
    assert!(text
        .lines()
        .filter(|l| !l.starts_with(' '))
        .all(|l| l.trim_end().ends_with('"')));
}

#[test]
fn reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, workers: &str| {
        let out = dir.path().join(name);
        let o = convlab(&[
            "--seed",
            "7",
            "--scenario",
            "BIN2POIS",
            "--scenario",
            "CORR_COEF",
            "--replicates",
            "1000",
            "--workers",
            workers,
            "--format",
            "json",
            "--format",
            "csv",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a", "1"), run("b", "2"));
    for file in [
        "BIN2POIS_seed7.json",
        "BIN2POIS_seed7.csv",
        "BIN2POIS_seed7_cdf.csv",
        "CORR_COEF_seed7.json",
    ] {
        let x = fs::read(a.join(file)).unwrap_or_else(|e| panic!("{file}: {e}"));
        assert_eq!(x, fs::read(b.join(file)).unwrap(), "{file} differs");
    }
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(a.join("BIN2POIS_seed7.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "pass");
    assert_eq!(report["mc"]["seed"], 7);
}

#[test]
fn failing_scenario_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // a two-rung ladder this short cannot reach the tolerance
    let cfg = write_config(
        dir.path(),
        r#"{"scenarios": [{"id": "HYP2BIN", "params": {"ladder": [10, 20]}}], "mc": {"seed": 5}}"#,
    );
    let out = dir.path().join("reports");
    let o = convlab(&["--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stderr).contains("failing scenarios: HYP2BIN"));
    assert!(out.join("HYP2BIN_seed5.json").exists());
}
