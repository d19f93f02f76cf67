use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conformal-energy"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn moebius_energy_is_one() {
    let out = cli(&["energy", "--map", "mobius:a=0.5+0i,rot=0", "--n", "1024"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let e = &v["result"];
    assert!((e["value"].as_f64().unwrap() - 1.0).abs() < 5e-4);
    assert!(e["err"].as_f64().unwrap() >= 0.0);
    assert_eq!(e["n_used"], 1024);
    assert_eq!(e["method"], "midpoint-subtracted");
    assert_eq!(v["config"]["subcommand"], "energy");
}

#[test]
fn unit_linear_gauge_bound_is_one() {
    let out = cli(&["bound", "--eta", "linear:alpha=1"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((v["result"]["bound"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn scan_reports_are_byte_identical() {
    let args = ["scan", "--map", "pwl:lambda=0.05", "--seed", "11", "--quadruples", "2000"];
    let first = cli(&args);
    let second = cli(&args);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
    let text = stdout(&first);
    assert!(text.contains("\nt,eta_hat,support_count\n"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 65);
}

#[test]
fn worker_count_does_not_change_reports() {
    let run = |workers: &str| {
        Command::new(env!("CARGO_BIN_EXE_conformal-energy"))
            .args(["energy", "--map", "comp(mobius:a=0.3+0i,rot=0,square)", "--n", "512"])
            .env("CONFORMAL_ENERGY_WORKERS", workers)
            .output()
            .unwrap()
    };
    let one = run("1");
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, run("4").stdout);
    assert_eq!(run("zero").status.code(), Some(2));
}

#[test]
fn reports_rerun_from_their_embedded_config() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("trace.csv");
    let report_str = report.to_str().unwrap();
    let out = cli(&["descend", "--map", "pert(identity;0,0.1)", "--modes", "4", "--n", "256", "--output", report_str]);
    assert_eq!(out.status.code(), Some(0));
    let first = std::fs::read_to_string(&report).unwrap();
    assert!(first.contains("\nstep,energy,grad_norm,step_size\n"));
    let out = cli(&["--config", report_str]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&report).unwrap(), first);

    let json = dir.path().join("douglas.json");
    let out = cli(&["douglas", "--map", "square", "--truncation", "64", "--format", "json", "--output", json.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let first = std::fs::read_to_string(&json).unwrap();
    let again = cli(&["--config", json.to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&json).unwrap(), first);
}

#[test]
fn pwl_study_recovers_the_logarithmic_slope() {
    let out = cli(&["study-pwl", "--lambdas", "1e-1,3e-2,1e-2,3e-3,1e-3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let summary = text
        .lines()
        .find(|l| l.starts_with("# inverse_slope="))
        .expect("summary line");
    let slope: f64 = summary["# inverse_slope=".len()..summary.find(',').unwrap()].parse().unwrap();
    let expected = (2.0 - 2.0 * 1f64.cos()) / (2.0 * std::f64::consts::PI.powi(2));
    assert!((slope - expected).abs() <= 0.25 * expected, "{slope} vs {expected}");
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 5);
}

#[test]
fn parse_errors_exit_two_with_a_caret() {
    let out = cli(&["energy", "--map", "comp(square,pwl:lambda=x)"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("position 23"), "{err}");
    assert!(err.contains(&format!("{}^", " ".repeat(23))), "{err}");
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"subcommand":"energy","map":"square","colour":"red"}"#).unwrap();
    assert_eq!(cli(&["--config", path.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(cli(&["residual"]).status.code(), Some(2));
    assert_eq!(cli(&["energy", "--map", "square", "--n", "32"]).status.code(), Some(2));
    assert!(!Path::new("bad.json").exists());
}

#[test]
fn numerical_failures_exit_three() {
    let out = cli(&["variation", "--map", "comp(square,square)", "--n", "256"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn timings_appear_only_on_request() {
    let plain = stdout(&cli(&["bound"]));
    assert!(!plain.contains("timings_ms"));
    let timed = stdout(&cli(&["bound", "--timings"]));
    assert!(timed.contains("timings_ms"));
}
