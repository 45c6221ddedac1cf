//! The canned scenario suite and its verdicts.

use ancova_core::simulation::{binomial_se, Check};
use ancova_core::{BiasDirection, SimPlan, SimReport, Tolerance, VarianceKind};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::output::Table;
use crate::scenarios::{self, SCENARIOS};

/// Replications per scenario under `--fast`.
pub const FAST_REPS: u64 = 2000;

#[derive(Debug, Clone, Default)]
pub struct SuiteOptions {
    /// Scenario names; empty selects the whole suite.
    pub scenarios: Vec<String>,
    pub fast: bool,
    pub seed: Option<u64>,
    pub reps: Option<u64>,
    pub n: Option<usize>,
    pub level: Option<f64>,
    pub estimators: Option<Vec<VarianceKind>>,
}

impl SuiteOptions {
    pub fn plans(&self) -> Result<Vec<SimPlan>> {
        let selected: Vec<&scenarios::Scenario> = if self.scenarios.is_empty() {
            SCENARIOS.iter().collect()
        } else {
            self.scenarios
                .iter()
                .map(|name| scenarios::find(name))
                .collect::<Result<_>>()?
        };
        let mut plans = Vec::with_capacity(selected.len());
        for s in selected {
            let mut plan = s.plan();
            if self.fast {
                plan.reps = FAST_REPS;
            }
            if let Some(reps) = self.reps {
                plan.reps = reps;
            }
            if let Some(n) = self.n {
                plan.n = n;
            }
            if let Some(level) = self.level {
                plan.level = level;
            }
            if let Some(seed) = self.seed {
                // Distinct streams per scenario under one user seed.
                plan.seed = seed.wrapping_add(plans.len() as u64);
            }
            if let Some(kinds) = &self.estimators {
                plan.estimators = kinds.clone();
            }
            plan.validate().map_err(Error::from)?;
            plans.push(plan);
        }
        Ok(plans)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorVerdict {
    pub estimator: VarianceKind,
    pub checks: Vec<Check>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioVerdict {
    pub scenario: String,
    pub direction: BiasDirection,
    pub predicted_type1: f64,
    pub extrapolation: bool,
    pub estimators: Vec<EstimatorVerdict>,
    pub pass: bool,
}

/// Observed rejection on the predicted side of the nominal rate.
fn direction_check(rate: f64, alpha: f64, direction: BiasDirection, reps: u64, mc_se: f64) -> Check {
    let (expected, pass) = match direction {
        BiasDirection::Anticonservative => (alpha, rate > alpha),
        BiasDirection::Conservative => (alpha, rate < alpha),
        BiasDirection::Exact => {
            let allowed = mc_se * binomial_se(alpha, reps);
            return Check::within("rejection_direction", rate, alpha, allowed);
        }
    };
    Check {
        name: "rejection_direction".into(),
        observed: rate,
        expected,
        allowed: 0.0,
        pass,
    }
}

/// Every estimator's checks against its limits. In `fast` mode the
/// model-based rejection and coverage checks are replaced by a check of the
/// bias direction only.
pub fn judge(report: &SimReport, fast: bool, tolerance: &Tolerance) -> ScenarioVerdict {
    let alpha = 1.0 - report.level;
    let estimators: Vec<EstimatorVerdict> = report
        .estimators
        .iter()
        .map(|s| {
            let mut checks = s.checks(report.reps, tolerance);
            let (truth, plim) = (s.thm1, s.plim_n_var_hat);
            let direction = if truth == plim {
                BiasDirection::Exact
            } else {
                report.limits.diagnosis.direction
            };
            if fast && s.estimator.is_model_based() && direction != BiasDirection::Exact {
                checks.retain(|c| !c.name.starts_with("rejection") && !c.name.starts_with("coverage"));
                if let Some(rate) = s.rejection_rate {
                    checks.push(direction_check(rate, alpha, direction, report.reps, tolerance.mc_se));
                }
            }
            let pass = !checks.is_empty() && checks.iter().all(|c| c.pass);
            EstimatorVerdict {
                estimator: s.estimator,
                checks,
                pass,
            }
        })
        .collect();
    ScenarioVerdict {
        scenario: report.scenario.clone(),
        direction: report.limits.diagnosis.direction,
        predicted_type1: report.limits.diagnosis.predicted_type1,
        extrapolation: report.extrapolation,
        pass: estimators.iter().all(|e| e.pass),
        estimators,
    }
}

pub fn verdict_table(verdicts: &[ScenarioVerdict]) -> Table {
    let mut table = Table::new(&[
        "scenario", "estimator", "check", "observed", "expected", "allowed", "result",
    ]);
    for v in verdicts {
        for e in &v.estimators {
            for c in &e.checks {
                table.push(vec![
                    v.scenario.clone().into(),
                    e.estimator.as_str().into(),
                    c.name.clone().into(),
                    c.observed.into(),
                    c.expected.into(),
                    c.allowed.into(),
                    if c.pass { "pass" } else { "FAIL" }.into(),
                ]);
            }
        }
    }
    table
}
