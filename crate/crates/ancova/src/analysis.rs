//! Estimates and tests for one observed trial.

use ancova_core::estimators::{variance_of_kind, EstimateTarget};
use ancova_core::{
    ancova_fit, unadjusted_estimate, wald_test, Reference, TrialDataset, VarianceKind,
};
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Distance of the treated fraction from 1/2 beyond which model-based
/// standard errors are flagged.
pub const IMBALANCE_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub estimators: Vec<VarianceKind>,
    pub level: f64,
    pub null_value: f64,
    pub reference: Reference,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            estimators: VarianceKind::ALL.to_vec(),
            level: 0.95,
            null_value: 0.0,
            reference: Reference::Normal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorRow {
    pub estimator: VarianceKind,
    pub target: EstimateTarget,
    pub estimate: f64,
    pub variance: f64,
    pub std_error: f64,
    pub dof: f64,
    pub reference: Reference,
    /// Absent when the estimated variance is zero.
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub n: usize,
    pub k: usize,
    pub n_treated: usize,
    pub n_control: usize,
    pub pi_hat: f64,
    pub unadjusted_estimate: f64,
    pub ancova_estimate: f64,
    pub beta0: f64,
    pub beta_w: Vec<f64>,
    pub covariate_names: Vec<String>,
    pub condition_number: f64,
    pub null_value: f64,
    pub level: f64,
    pub estimators: Vec<EstimatorRow>,
    pub warnings: Vec<String>,
}

pub fn analyze(data: &TrialDataset, options: &AnalysisOptions) -> Result<Analysis> {
    let fit = ancova_fit(data)?;
    let unadjusted = unadjusted_estimate(data);
    let mut rows = Vec::with_capacity(options.estimators.len());
    for &kind in &options.estimators {
        let var = variance_of_kind(data, &fit, kind)?.with_reference(options.reference);
        let estimate = match kind.target() {
            EstimateTarget::Ancova => fit.beta_a,
            EstimateTarget::Unadjusted => unadjusted,
        };
        let wald = if var.value > 0.0 {
            Some(wald_test(estimate, &var, options.null_value, options.level)?)
        } else {
            None
        };
        rows.push(EstimatorRow {
            estimator: kind,
            target: kind.target(),
            estimate,
            variance: var.value,
            std_error: var.std_error(),
            dof: var.dof,
            reference: var.reference,
            statistic: wald.map(|w| w.statistic),
            p_value: wald.map(|w| w.p_value),
            ci_lower: wald.map(|w| w.ci_lower),
            ci_upper: wald.map(|w| w.ci_upper),
        });
    }
    let mut warnings = Vec::new();
    let pi_hat = data.pi_hat();
    if (pi_hat - 0.5).abs() > IMBALANCE_THRESHOLD
        && options.estimators.iter().any(|k| k.is_model_based())
    {
        warnings.push(format!(
            "treated fraction {pi_hat:.3} differs from 1/2 by more than {IMBALANCE_THRESHOLD}; \
             model-based standard errors are in general inconsistent here, prefer sandwich_if_df"
        ));
    }
    if rows.iter().any(|r| r.statistic.is_none()) {
        warnings.push("zero estimated variance: Wald tests are undefined for those rows".into());
    }
    let (n_treated, n_control) = data.arm_counts();
    Ok(Analysis {
        n: data.n(),
        k: data.k(),
        n_treated,
        n_control,
        pi_hat,
        unadjusted_estimate: unadjusted,
        ancova_estimate: fit.beta_a,
        beta0: fit.beta0,
        beta_w: fit.beta_w.clone(),
        covariate_names: data.covariate_names().to_vec(),
        condition_number: fit.condition_number,
        null_value: options.null_value,
        level: options.level,
        estimators: rows,
        warnings,
    })
}
