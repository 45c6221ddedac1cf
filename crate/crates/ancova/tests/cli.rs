mod common;

use std::fs;

use ancova_core::SimReport;
use common::*;
use serde_json::Value;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn analyze_matches_hand_computed_fixture() {
    let out = ancova(&["analyze", "--input", path_str(&fixture("example6.csv")), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let got: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let want: Value =
        serde_json::from_str(&fs::read_to_string(fixture("example6.expected.json")).unwrap()).unwrap();
    for key in ["pi_hat", "unadjusted_estimate", "ancova_estimate", "beta0"] {
        let (g, w) = (got[key].as_f64().unwrap(), want[key].as_f64().unwrap());
        assert!(rel(g, w) < 1e-12 || (g - w).abs() < 1e-14, "{key}: {g} vs {w}");
    }
    assert!(rel(got["beta_w"][0].as_f64().unwrap(), 0.875) < 1e-12);
    for row in got["estimators"].as_array().unwrap() {
        let kind = row["estimator"].as_str().unwrap();
        let w = want["variances"][kind].as_f64().unwrap();
        assert!(rel(row["variance"].as_f64().unwrap(), w) < 1e-12, "{kind}");
    }
    assert!(stderr(&out).is_empty());
}

#[test]
fn analyze_without_covariates_has_equal_ancova_and_unadjusted_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(dir.path(), "k0.csv", "Y,A\n3,1\n1,0\n2,1\n4,0\n7,1\n5,0\n");
    let out = ancova(&["analyze", "--input", path_str(&csv), "--format", "json",
        "--estimators", "sandwich_if_df,welch"]);
    let got: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let rows = got["estimators"].as_array().unwrap();
    let est = |v: &Value| v.as_f64().unwrap();
    assert!(rel(est(&rows[0]["estimate"]), est(&rows[1]["estimate"])) < 1e-12);
    assert!(rel(est(&got["ancova_estimate"]), est(&got["unadjusted_estimate"])) < 1e-12);
    // Balanced arms: the df-corrected sandwich is the Welch variance.
    assert!(rel(rows[0]["variance"].as_f64().unwrap(), rows[1]["variance"].as_f64().unwrap()) < 1e-12);
}

#[test]
fn analyze_warns_on_imbalance_with_model_based_selected() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("Y,A,W1\n");
    for i in 0..10 {
        let a = u8::from(i < 7);
        text.push_str(&format!("{},{a},{}\n", (i * 3 % 5) as f64 + 0.5 * a as f64, i as f64 / 10.0));
    }
    let csv = write(dir.path(), "imb.csv", &text);
    let out = ancova(&["analyze", "--input", path_str(&csv), "--estimators", "model_based_paper"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stderr(&out).contains("warning: treated fraction 0.700"), "{}", stderr(&out));
    let out = ancova(&["analyze", "--input", path_str(&csv), "--estimators", "sandwich_if_df"]);
    assert!(!stderr(&out).contains("warning"));
}

#[test]
fn analyze_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.csv", "Y,A\n1,1\n2,2\n3,0\n");
    let out = ancova(&["analyze", "--input", path_str(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("row 2, column `A`: arm indicator not in {0,1}"), "{}", stderr(&out));

    let missing = ancova(&["analyze", "--input", path_str(&dir.path().join("none.csv"))]);
    assert_eq!(missing.status.code(), Some(2));

    let collinear = write(dir.path(), "col.csv", "Y,A,W1\n1,1,1\n2,0,0\n3,1,1\n4,0,0\n5,1,1\n");
    let out = ancova(&["analyze", "--input", path_str(&collinear)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("`W1`"), "{}", stderr(&out));

    let out = ancova(&["analyze", "--input", path_str(&bad), "--estimators", "ols"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analyze_writes_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = ancova(&["analyze", "--input", path_str(&fixture("example6.csv")), "--format", "csv",
        "--output", path_str(&out_dir)]);
    assert_eq!(out.status.code(), Some(0));
    let written = fs::read_to_string(out_dir.join("analysis.csv")).unwrap();
    assert_eq!(written, stdout(&out));
    assert!(written.starts_with("estimator,target,estimate,std_error"));
}

#[test]
fn limits_reports_reference_values() {
    let out = ancova(&["limits", "--input", path_str(&scenario_file("S1")), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(rel(v["thm1_value"].as_f64().unwrap(), 8.726190476190474) < 1e-12);
    assert!(rel(v["thm2_value"].as_f64().unwrap(), 7.011904761904761) < 1e-12);
    assert_eq!(v["diagnosis"]["direction"], "anticonservative");
    assert_eq!(v["route"], "analytic");

    let out = ancova(&["limits", "--input", path_str(&scenario_file("S0"))]);
    let text = stdout(&out);
    assert!(text.contains("exact") && text.contains("0.050000"), "{text}");
}

#[test]
fn limits_schema_errors_carry_field_paths() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenario_file("S1")).unwrap();
    let bad = write(dir.path(), "bad.json", &text.replace("\"low\"", "\"lo\""));
    let out = ancova(&["limits", "--input", path_str(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("at `dgp.covariate_law[0].uniform"), "{}", stderr(&out));
    let bad = write(dir.path(), "neg.json", &text.replace("\"constant\": 1.0", "\"constant\": -1.0"));
    let out = ancova(&["limits", "--input", path_str(&bad)]);
    assert!(stderr(&out).contains("at `dgp.noise_sd.treated.constant`"), "{}", stderr(&out));
}

#[test]
fn limits_brute_force_route_for_nonlinear_means() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenario_file("S1")).unwrap().replacen(
        "\"linear\": {\n          \"intercept\": 0.0,\n          \"slopes\": [\n            2.0\n          ]\n        }",
        "\"quadratic\": {\"intercept\": 0.0, \"slopes\": [0.0], \"curvature\": [1.0]}",
        1,
    );
    assert!(text.contains("quadratic"));
    let spec = write(dir.path(), "quad.json", &text);
    let out = ancova(&["limits", "--input", path_str(&spec), "--draws", "200000", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("route,brute_force,"));
}

fn small_plan(dir: &std::path::Path) -> std::path::PathBuf {
    let text = fs::read_to_string(scenario_file("S1")).unwrap();
    let mut plan: Value = serde_json::from_str(&text).unwrap();
    plan["n"] = Value::from(200);
    plan["reps"] = Value::from(300);
    write(dir, "plan.json", &plan.to_string())
}

#[test]
fn simulate_writes_consistent_files() {
    let dir = tempfile::tempdir().unwrap();
    let plan = small_plan(dir.path());
    let out_dir = dir.path().join("run");
    let out = ancova(&["simulate", "--input", path_str(&plan), "--output", path_str(&out_dir), "--dump", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary, stdout(&out));
    let mut lines = summary.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scenario,pi,n,estimator,mean_n_var_hat,thm2,emp_n_var,thm1,rejection,predicted_rejection,coverage,verdict"
    );
    let report_text = fs::read_to_string(out_dir.join("S1.json")).unwrap();
    let report: SimReport = serde_json::from_str(&report_text).unwrap();
    assert_eq!(ancova::json::to_pretty(&report), report_text);
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    let s = &report.estimators[0];
    assert_eq!(first[3], s.estimator.as_str());
    assert_eq!(first[4].parse::<f64>().unwrap(), s.mean_n_var_hat);
    assert_eq!(first[6].parse::<f64>().unwrap(), s.empirical_n_variance);
    assert_eq!(first[8].parse::<f64>().unwrap(), s.rejection_rate.unwrap());
    assert_eq!(first[10].parse::<f64>().unwrap(), s.coverage.unwrap());
    let reps = fs::read_to_string(out_dir.join("S1.replications.csv")).unwrap();
    assert!(reps.starts_with("rep,delta_hat,model_based_paper,sandwich_if_df\n"));
    assert_eq!(reps.lines().count(), 301);
    assert!(out_dir.join("coverage_vs_pi.csv").exists());
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["completed"][0]["report"], "S1.json");
    assert_eq!(manifest["failed"], Value::Null);
}

#[test]
fn simulate_twice_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let plan = small_plan(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (target, workers) in [(&a, "1"), (&b, "3")] {
        let out = ancova(&["simulate", "--input", path_str(&plan), "--output", path_str(target), "--workers", workers, "--dump"]);
        assert_eq!(out.status.code(), Some(0));
    }
    for name in ["S1.json", "summary.csv", "coverage_vs_pi.csv", "manifest.json", "S1.replications.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn simulate_rejects_zero_reps() {
    let dir = tempfile::tempdir().unwrap();
    let plan = small_plan(dir.path());
    let out = ancova(&["simulate", "--input", path_str(&plan), "--output", path_str(dir.path()), "--reps", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("`reps`"), "{}", stderr(&out));
}

#[test]
fn reproduce_lists_scenarios_for_unknown_names() {
    let out = ancova(&["reproduce", "S7"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("unknown scenario `S7`") && err.contains("S0, S1, S1-swap, S2, S3, W0"), "{err}");
    let list = ancova(&["reproduce", "--list"]);
    assert_eq!(stdout(&list).lines().count(), 6);
}

#[test]
fn reproduce_fast_writes_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let out = ancova(&["reproduce", "S2", "W0", "--fast", "--n", "400", "--output", path_str(dir.path()), "--format", "json"]);
    let verdicts: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(verdicts.as_array().unwrap().len(), 2);
    let all_pass = verdicts.as_array().unwrap().iter().all(|v| v["pass"] == true);
    assert_eq!(out.status.code(), Some(if all_pass { 0 } else { 1 }));
    assert_eq!(verdicts[0]["direction"], "exact");
    assert!(dir.path().join("verdicts.json").exists());
    assert!(dir.path().join("W0.json").exists());
}
