//! End-to-end checks of the command-line surface against the bundled
//! synthetic fixture: report shape, determinism, sanity modes, and error
//! rendering.

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/synthetic_crime.csv")
}

fn run_selinf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_selinf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn parse_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn lars_path_report_shape() {
    let fix = fixture();
    let out = run_selinf(&[
        "path",
        "--input",
        fix.to_str().unwrap(),
        "--response",
        "crime_rate",
        "--method",
        "lars",
        "--steps",
        "4",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = parse_stdout(&out);
    assert_eq!(v["schema"], "selinf/1");
    assert_eq!(v["command"], "path");
    let knots = v["result"]["knots"].as_array().unwrap();
    assert_eq!(knots.len(), 4);
    // Knots nonincreasing.
    let vals: Vec<f64> = knots.iter().map(|x| x.as_f64().unwrap()).collect();
    for w in vals.windows(2) {
        assert!(w[1] <= w[0] + 1e-12);
    }
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let fix = fixture();
    let args = [
        "infer",
        "--input",
        fix.to_str().unwrap(),
        "--response",
        "crime_rate",
        "--method",
        "lars",
        "--steps",
        "3",
        "--target-step",
        "1",
        "--sigma",
        "estimate",
        "--seed",
        "42",
        "--compact",
    ];
    let a = run_selinf(&args);
    let b = run_selinf(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout, "same seed and input must give identical bytes");
}

#[test]
fn lasso_infer_reports_region_and_interval() {
    let fix = fixture();
    let out = run_selinf(&[
        "infer",
        "--input",
        fix.to_str().unwrap(),
        "--response",
        "crime_rate",
        "--method",
        "lasso",
        "--lambda",
        "200",
        "--target-variable",
        "0",
        "--sigma",
        "estimate",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let v = parse_stdout(&out);
    let res = &v["result"];
    assert_eq!(res["method"], "polyhedral");
    assert!(res["p_value"].as_f64().unwrap() > 0.0);
    let ci = res["ci"].as_array().unwrap();
    assert!(ci[0].as_f64().unwrap() <= ci[1].as_f64().unwrap());
    assert!(!res["region"].as_array().unwrap().is_empty());
}

#[test]
fn no_condition_matches_classical_z() {
    // Sanity mode: the untruncated p-value equals the classical two-sided
    // z-test for the same contrast.
    let fix = fixture();
    let out = run_selinf(&[
        "infer",
        "--input",
        fix.to_str().unwrap(),
        "--response",
        "crime_rate",
        "--method",
        "lasso",
        "--lambda",
        "200",
        "--target-variable",
        "0",
        "--sigma",
        "estimate",
        "--no-condition",
    ]);
    assert!(out.status.success());
    let v = parse_stdout(&out);
    let res = &v["result"];
    let stat = res["statistic"].as_f64().unwrap();
    let scale = res["scale"].as_f64().unwrap();
    let p = res["p_value"].as_f64().unwrap();
    let z = (stat / scale).abs();
    let classical = 2.0 * 0.5 * erfc_approx(z / std::f64::consts::SQRT_2);
    assert!((p - classical).abs() < 1e-9, "p {p} vs classical {classical}");
}

// Small local erfc so the test does not reach into the library internals.
fn erfc_approx(x: f64) -> f64 {
    // Abramowitz-Stegun 7.1.26-style; 1e-7 absolute accuracy is plenty here.
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    poly * (-x * x).exp()
}

#[test]
fn spacing_variants_ordered_in_output() {
    let fix = fixture();
    let out = run_selinf(&[
        "infer",
        "--input",
        fix.to_str().unwrap(),
        "--response",
        "crime_rate",
        "--method",
        "lars",
        "--steps",
        "3",
        "--target-step",
        "2",
        "--sigma",
        "estimate",
    ]);
    assert!(out.status.success());
    let v = parse_stdout(&out);
    let res = &v["result"];
    let exact = res["spacing_exact"]["t"].as_f64().unwrap();
    let simplified = res["spacing_simplified"]["t"].as_f64().unwrap();
    assert!(
        exact <= simplified + 1e-12,
        "exact {exact} must not exceed simplified {simplified}"
    );
}

#[test]
fn steps_beyond_p_is_a_validation_error() {
    let fix = fixture();
    let out = run_selinf(&[
        "path",
        "--input",
        fix.to_str().unwrap(),
        "--response",
        "crime_rate",
        "--method",
        "lars",
        "--steps",
        "99",
    ]);
    assert!(!out.status.success());
    let v = parse_stdout(&out);
    assert!(v["error"]["message"].as_str().unwrap().contains("steps"));
}

#[test]
fn missing_response_column_error() {
    let fix = fixture();
    let out = run_selinf(&[
        "path",
        "--input",
        fix.to_str().unwrap(),
        "--response",
        "not_a_column",
        "--method",
        "lars",
        "--steps",
        "2",
    ]);
    assert!(!out.status.success());
    let v = parse_stdout(&out);
    assert_eq!(v["schema"], "selinf/1");
    assert!(v["error"]["message"]
        .as_str()
        .unwrap()
        .contains("not_a_column"));
}

#[test]
fn simulate_writes_json_and_qq_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out_json = dir.path().join("sim.json");
    let out = run_selinf(&[
        "simulate",
        "--scenario",
        "rss_drop",
        "--n",
        "40",
        "--p",
        "10",
        "--reps",
        "150",
        "--seed",
        "7",
        "--out",
        out_json.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out_json).unwrap()).unwrap();
    assert_eq!(report["command"], "simulate");
    assert!(report["result"]["mean"].as_f64().unwrap() > 1.0);
    let qq = std::fs::read_to_string(dir.path().join("sim.qq.csv")).unwrap();
    assert!(qq.starts_with("theoretical,empirical\n"));
    assert_eq!(qq.lines().count(), 151); // header + one row per replicate
}

#[test]
fn fs_infer_on_fixture() {
    let fix = fixture();
    let out = run_selinf(&[
        "infer",
        "--input",
        fix.to_str().unwrap(),
        "--response",
        "crime_rate",
        "--method",
        "fs",
        "--steps",
        "2",
        "--target-step",
        "1",
        "--sigma",
        "estimate",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let v = parse_stdout(&out);
    let res = &v["result"];
    assert_eq!(res["method"], "polyhedral");
    let p = res["p_value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
}
