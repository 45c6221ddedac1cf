//! Runs a list of plans and writes their reports, summary tables and a
//! manifest to a directory.

use std::fs;
use std::path::{Path, PathBuf};

use ancova_core::estimators::EstimateTarget;
use ancova_core::{simulate, Executor, ReplicationOutcome, SimPlan, SimReport, Tolerance};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json::to_pretty;
use crate::output::{Cell, Table};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const COVERAGE_FILE: &str = "coverage_vs_pi.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub const SUMMARY_HEADER: [&str; 12] = [
    "scenario",
    "pi",
    "n",
    "estimator",
    "mean_n_var_hat",
    "thm2",
    "emp_n_var",
    "thm1",
    "rejection",
    "predicted_rejection",
    "coverage",
    "verdict",
];

#[derive(Debug, Clone, Copy, Default)]
pub struct SweepOptions {
    /// Also write one CSV row per replication for every plan.
    pub dump_replications: bool,
    pub tolerance: Tolerance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub scenario: String,
    pub report: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replications: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedPlan {
    pub index: usize,
    pub scenario: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub plans: usize,
    pub completed: Vec<ManifestEntry>,
    pub failed: Option<FailedPlan>,
}

/// Limits of the point estimate behind each summary row.
fn target_limits(report: &SimReport, target: EstimateTarget) -> (f64, f64) {
    match target {
        EstimateTarget::Ancova => (report.limits.thm1_value, report.limits.thm2_value),
        EstimateTarget::Unadjusted => (
            report.limits.unadjusted.thm1_value,
            report.limits.unadjusted.thm2_value,
        ),
    }
}

pub fn summary_table(reports: &[SimReport], tolerance: &Tolerance) -> Table {
    let mut table = Table::new(&SUMMARY_HEADER);
    for r in reports {
        for s in &r.estimators {
            let (thm1, thm2) = target_limits(r, s.estimator.target());
            let verdict = if s.verdict(r.reps, tolerance) { "pass" } else { "fail" };
            table.push(vec![
                r.scenario.clone().into(),
                r.pi.into(),
                r.n.into(),
                s.estimator.as_str().into(),
                s.mean_n_var_hat.into(),
                thm2.into(),
                s.empirical_n_variance.into(),
                thm1.into(),
                s.rejection_rate.into(),
                s.predicted_rejection.into(),
                s.coverage.into(),
                verdict.into(),
            ]);
        }
    }
    table
}

/// Plot data: coverage against the randomisation probability.
pub fn coverage_table(reports: &[SimReport]) -> Table {
    let mut table = Table::new(&[
        "scenario",
        "pi",
        "n",
        "estimator",
        "coverage",
        "coverage_se",
        "predicted_coverage",
        "bias_ratio",
    ]);
    for r in reports {
        for s in &r.estimators {
            let (thm1, plim) = (s.thm1, s.plim_n_var_hat);
            let ratio = if thm1 == plim { 1.0 } else { plim / thm1 };
            table.push(vec![
                r.scenario.clone().into(),
                r.pi.into(),
                r.n.into(),
                s.estimator.as_str().into(),
                s.coverage.into(),
                s.coverage_se.into(),
                (1.0 - s.predicted_rejection).into(),
                ratio.into(),
            ]);
        }
    }
    table
}

/// One row per replication: the ANCOVA estimate and each variance. The
/// unadjusted estimate is added only when an unadjusted estimator ran.
pub fn replication_table(plan: &SimPlan, outcomes: &[ReplicationOutcome]) -> Table {
    let unadjusted = plan
        .estimators
        .iter()
        .any(|k| k.target() == EstimateTarget::Unadjusted);
    let mut headers = vec!["rep", "delta_hat"];
    if unadjusted {
        headers.push("delta_hat_unadjusted");
    }
    headers.extend(plan.estimators.iter().map(|k| k.as_str()));
    let mut table = Table::new(&headers);
    for o in outcomes {
        let mut row: Vec<Cell> = vec![o.rep.into(), o.ancova_estimate.into()];
        if unadjusted {
            row.push(o.unadjusted_estimate.into());
        }
        row.extend(o.kinds.iter().map(|k| Cell::from(k.variance)));
        table.push(row);
    }
    table
}

fn file_stem(plan: &SimPlan, index: usize, used: &[String]) -> String {
    let base: String = plan
        .scenario
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    let base = if base.is_empty() { "plan".to_owned() } else { base };
    if used.contains(&base) {
        format!("{base}-{index}")
    } else {
        base
    }
}

fn write(path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::io(path, e))
}

/// Runs `plans` in order, writing `<scenario>.json` per plan plus the summary
/// tables and manifest. On failure everything completed so far is still
/// written, the manifest names the failed plan, and the error is returned.
pub fn sweep<E: Executor>(
    plans: &[SimPlan],
    dir: &Path,
    executor: &E,
    options: &SweepOptions,
) -> Result<Vec<SimReport>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut reports = Vec::with_capacity(plans.len());
    let mut manifest = Manifest {
        plans: plans.len(),
        completed: Vec::new(),
        failed: None,
    };
    let mut used = Vec::new();
    let mut failure = None;
    for (index, plan) in plans.iter().enumerate() {
        match simulate(plan, executor) {
            Ok((report, outcomes)) => {
                let stem = file_stem(plan, index, &used);
                let report_file = format!("{stem}.json");
                write(dir.join(&report_file), &to_pretty(&report))?;
                let replications = if options.dump_replications {
                    let name = format!("{stem}.replications.csv");
                    write(dir.join(&name), &replication_table(plan, &outcomes).to_csv())?;
                    Some(name)
                } else {
                    None
                };
                manifest.completed.push(ManifestEntry {
                    scenario: plan.scenario.clone(),
                    report: report_file,
                    replications,
                });
                used.push(stem);
                reports.push(report);
            }
            Err(e) => {
                manifest.failed = Some(FailedPlan {
                    index,
                    scenario: plan.scenario.clone(),
                    error: e.to_string(),
                });
                failure = Some(e);
                break;
            }
        }
    }
    write(dir.join(SUMMARY_FILE), &summary_table(&reports, &options.tolerance).to_csv())?;
    write(dir.join(COVERAGE_FILE), &coverage_table(&reports).to_csv())?;
    write(dir.join(MANIFEST_FILE), &to_pretty(&manifest))?;
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(reports),
    }
}
