//! Monte Carlo engine: draws trials from a [`DgpSpec`], applies the
//! estimators and aggregates size, coverage and variance diagnostics against
//! the population limits.
//!
//! Replication `r` reads only the substreams `(seed, r, attempt, tag)`, and
//! aggregation runs in replication order, so a plan produces bit-identical
//! output under any [`Executor`].

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use libm::{fabs, sqrt};
use serde::{Deserialize, Serialize};

use crate::asymptotics::{limits_with, AsymptoticLimits, BruteForceConfig};
use crate::data::TrialDataset;
use crate::dgp::DgpSpec;
use crate::error::{Error, Result};
use crate::estimators::{
    ancova_fit, critical_value, unadjusted_estimate, variance_of_kind, wald_with_critical,
    EstimateTarget, VarianceEstimate, VarianceKind,
};
use crate::exec::{Executor, Sequential};
use crate::rng::{stream_id, tag, Stream};

/// Redraws beyond this fraction of replications abort the run.
pub const MAX_REDRAW_FRACTION: f64 = 0.01;

const MAX_ATTEMPTS: u16 = u16::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assignment {
    /// Each unit treated independently with probability `pi`.
    #[default]
    IidBernoulli,
    /// Exactly `floor(n pi)` units treated, chosen uniformly at random.
    /// Results under this mode extrapolate beyond the i.i.d. theory.
    FixedMargin,
}

fn default_estimators() -> Vec<VarianceKind> {
    vec![VarianceKind::ModelBasedPaper, VarianceKind::SandwichIfDf]
}

fn default_level() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimPlan {
    #[serde(default)]
    pub scenario: String,
    pub dgp: DgpSpec,
    pub n: usize,
    pub reps: u64,
    pub seed: u64,
    #[serde(default)]
    pub assignment: Assignment,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<VarianceKind>,
    #[serde(default = "default_level")]
    pub level: f64,
    /// Value tested by the Wald tests; defaults to the spec's `delta`, which
    /// makes the rejection rate a size estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null_value: Option<f64>,
    /// Oracle settings for specs without closed-form limits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<BruteForceConfig>,
}

impl SimPlan {
    pub fn new(scenario: impl Into<String>, dgp: DgpSpec, n: usize, reps: u64, seed: u64) -> Self {
        SimPlan {
            scenario: scenario.into(),
            dgp,
            n,
            reps,
            seed,
            assignment: Assignment::IidBernoulli,
            estimators: default_estimators(),
            level: default_level(),
            null_value: None,
            oracle: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dgp.validate().map_err(|e| match e {
            Error::InvalidParameter { field, reason } => Error::InvalidParameter {
                field: format!("dgp.{field}"),
                reason,
            },
            other => other,
        })?;
        if self.reps == 0 {
            return Err(Error::invalid("reps", "must be at least 1"));
        }
        if self.reps >= 1 << 32 {
            return Err(Error::invalid("reps", "must be below 2^32"));
        }
        let k = self.dgp.k();
        if self.n < k + 3 {
            return Err(Error::invalid(
                "n",
                format!("{} is below k + 3 = {}", self.n, k + 3),
            ));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::invalid("level", "must lie in (0, 1)"));
        }
        if self.estimators.is_empty() {
            return Err(Error::invalid("estimators", "at least one estimator is required"));
        }
        for (i, kind) in self.estimators.iter().enumerate() {
            if self.estimators[..i].contains(kind) {
                return Err(Error::invalid("estimators", format!("`{kind}` listed twice")));
            }
        }
        if let Some(v) = self.null_value {
            if !v.is_finite() {
                return Err(Error::invalid("null_value", "must be finite"));
            }
        }
        if self.assignment == Assignment::FixedMargin {
            let treated = self.treated_count();
            if treated == 0 || treated >= self.n {
                return Err(Error::invalid(
                    "assignment",
                    format!("fixed margin gives {treated} treated out of {}", self.n),
                ));
            }
        }
        Ok(())
    }

    pub fn null_value(&self) -> f64 {
        self.null_value.unwrap_or_else(|| self.dgp.delta())
    }

    fn treated_count(&self) -> usize {
        libm::floor(self.n as f64 * self.dgp.pi) as usize
    }
}

/// One estimator's result within one replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KindOutcome {
    pub variance: f64,
    /// `None` when the variance is zero and no test is defined.
    pub rejected: Option<bool>,
    pub covered: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub rep: u64,
    pub redraws: u32,
    pub ancova_estimate: f64,
    pub unadjusted_estimate: f64,
    /// Aligned with the plan's estimator list.
    pub kinds: Vec<KindOutcome>,
}

impl ReplicationOutcome {
    pub fn estimate_for(&self, kind: VarianceKind) -> f64 {
        match kind.target() {
            EstimateTarget::Ancova => self.ancova_estimate,
            EstimateTarget::Unadjusted => self.unadjusted_estimate,
        }
    }
}

/// Draws the dataset for replication `rep`, attempt `attempt`.
pub fn draw_trial(plan: &SimPlan, rep: u64, attempt: u16) -> Result<TrialDataset> {
    let dgp = &plan.dgp;
    let n = plan.n;
    let k = dgp.k();
    let mut s_w = Stream::new(plan.seed, stream_id(rep, attempt, tag::COVARIATES));
    let mut s_a = Stream::new(plan.seed, stream_id(rep, attempt, tag::ASSIGNMENT));
    let mut s_y = Stream::new(plan.seed, stream_id(rep, attempt, tag::NOISE));

    let mut covariates = vec![0.0; n * k];
    for row in covariates.chunks_exact_mut(k.max(1)).take(if k == 0 { 0 } else { n }) {
        dgp.sample_covariates(&mut s_w, row);
    }
    let arms: Vec<u8> = match plan.assignment {
        Assignment::IidBernoulli => (0..n).map(|_| u8::from(s_a.next_f64() < dgp.pi)).collect(),
        Assignment::FixedMargin => {
            let treated = plan.treated_count();
            let mut order: Vec<usize> = (0..n).collect();
            for i in 0..treated {
                let j = i + s_a.below((n - i) as u64) as usize;
                order.swap(i, j);
            }
            let mut arms = vec![0u8; n];
            for &i in &order[..treated] {
                arms[i] = 1;
            }
            arms
        }
    };
    let outcomes: Vec<f64> = (0..n)
        .map(|i| dgp.sample_outcome(&covariates[i * k..(i + 1) * k], arms[i], &mut s_y))
        .collect();
    let names = (1..=k).map(|j| format!("W{j}")).collect();
    TrialDataset::new(outcomes, arms, covariates, names)
}

fn evaluate(
    plan: &SimPlan,
    data: &TrialDataset,
    criticals: &[f64],
    null_value: f64,
    truth: f64,
) -> Result<(f64, f64, Vec<KindOutcome>)> {
    let fit = ancova_fit(data)?;
    let unadjusted = unadjusted_estimate(data);
    let mut kinds = Vec::with_capacity(plan.estimators.len());
    for (kind, &critical) in plan.estimators.iter().zip(criticals) {
        let variance: VarianceEstimate = variance_of_kind(data, &fit, *kind)?;
        let estimate = match kind.target() {
            EstimateTarget::Ancova => fit.beta_a,
            EstimateTarget::Unadjusted => unadjusted,
        };
        let outcome = match wald_with_critical(estimate, &variance, null_value, plan.level, critical)
        {
            Ok(w) => KindOutcome {
                variance: variance.value,
                rejected: Some(w.rejects()),
                covered: Some(w.covers(truth)),
            },
            Err(Error::ZeroVariance(_)) => KindOutcome {
                variance: variance.value,
                rejected: None,
                covered: None,
            },
            Err(e) => return Err(e),
        };
        kinds.push(outcome);
    }
    Ok((fit.beta_a, unadjusted, kinds))
}

fn criticals(plan: &SimPlan) -> Vec<f64> {
    // Normal reference throughout; kind-specific dof are not used here.
    plan.estimators
        .iter()
        .map(|&kind| {
            let v = VarianceEstimate {
                value: 1.0,
                kind,
                dof: f64::INFINITY,
                reference: Default::default(),
            };
            critical_value(&v, plan.level)
        })
        .collect()
}

/// Runs one replication, redrawing degenerate designs on fresh substreams.
pub fn run_replication(plan: &SimPlan, rep: u64) -> Result<ReplicationOutcome> {
    let criticals = criticals(plan);
    replicate(plan, rep, &criticals, plan.null_value(), plan.dgp.delta())
}

fn replicate(
    plan: &SimPlan,
    rep: u64,
    criticals: &[f64],
    null_value: f64,
    truth: f64,
) -> Result<ReplicationOutcome> {
    let mut last_error = None;
    for attempt in 0..MAX_ATTEMPTS {
        let outcome = draw_trial(plan, rep, attempt)
            .and_then(|data| evaluate(plan, &data, criticals, null_value, truth));
        match outcome {
            Ok((ancova_estimate, unadjusted_estimate, kinds)) => {
                return Ok(ReplicationOutcome {
                    rep,
                    redraws: u32::from(attempt),
                    ancova_estimate,
                    unadjusted_estimate,
                    kinds,
                })
            }
            Err(
                e @ (Error::EmptyArm { .. }
                | Error::ArmTooSmall { .. }
                | Error::RankDeficient { .. }
                | Error::IllConditioned { .. }
                | Error::SingularCovariance
                | Error::DegenerateArm(_)),
            ) => last_error = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_error.unwrap_or(Error::TooManyRedraws {
        redraws: u64::from(MAX_ATTEMPTS),
        reps: 1,
    }))
}

/// Monte Carlo summary for one estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: VarianceKind,
    pub mean_estimate: f64,
    pub mean_estimate_se: f64,
    /// `n` times the empirical variance of the estimate across replications.
    pub empirical_n_variance: f64,
    pub empirical_n_variance_se: f64,
    /// Mean over replications of `n` times the estimated variance.
    pub mean_n_var_hat: f64,
    pub mean_n_var_hat_se: f64,
    pub rejection_rate: Option<f64>,
    pub rejection_se: Option<f64>,
    pub coverage: Option<f64>,
    pub coverage_se: Option<f64>,
    /// Replications where the variance was zero and no test was defined.
    pub degenerate_inference: u64,
    /// Limit of `n` times the true variance of this estimate.
    pub thm1: f64,
    /// Probability limit of `n` times this variance estimator.
    pub plim_n_var_hat: f64,
    pub predicted_rejection: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub scenario: String,
    pub pi: f64,
    pub n: usize,
    pub reps: u64,
    pub seed: u64,
    pub level: f64,
    pub assignment: Assignment,
    /// True under fixed-margin assignment, where the limits are an
    /// extrapolation.
    pub extrapolation: bool,
    pub delta: f64,
    pub null_value: f64,
    pub redraws: u64,
    pub limits: AsymptoticLimits,
    pub estimators: Vec<EstimatorSummary>,
}

impl SimReport {
    pub fn summary(&self, kind: VarianceKind) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|s| s.estimator == kind)
    }
}

pub fn run_simulation(plan: &SimPlan) -> Result<SimReport> {
    Ok(simulate(plan, &Sequential)?.0)
}

/// Runs every replication under `executor` and aggregates in replication
/// order. Returns the report and the per-replication outcomes.
pub fn simulate<E: Executor>(
    plan: &SimPlan,
    executor: &E,
) -> Result<(SimReport, Vec<ReplicationOutcome>)> {
    plan.validate()?;
    let oracle = plan.oracle.unwrap_or_default();
    let limits = limits_with(&plan.dgp, &oracle, executor)?.at_level(plan.level);
    let criticals = criticals(plan);
    let null_value = plan.null_value();
    let truth = plan.dgp.delta();

    let results = executor.map_indexed(plan.reps, |rep| {
        replicate(plan, rep, &criticals, null_value, truth)
    });
    let mut outcomes = Vec::with_capacity(results.len());
    for r in results {
        outcomes.push(r?);
    }
    let redraws: u64 = outcomes.iter().map(|o| u64::from(o.redraws)).sum();
    if redraws as f64 > MAX_REDRAW_FRACTION * plan.reps as f64 {
        return Err(Error::TooManyRedraws {
            redraws,
            reps: plan.reps,
        });
    }

    let estimators = plan
        .estimators
        .iter()
        .enumerate()
        .map(|(idx, &kind)| summarise(plan, &limits, &outcomes, idx, kind))
        .collect();

    let report = SimReport {
        scenario: plan.scenario.clone(),
        pi: plan.dgp.pi,
        n: plan.n,
        reps: plan.reps,
        seed: plan.seed,
        level: plan.level,
        assignment: plan.assignment,
        extrapolation: plan.assignment == Assignment::FixedMargin,
        delta: truth,
        null_value,
        redraws,
        limits,
        estimators,
    };
    Ok((report, outcomes))
}

fn mean_and_se(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let count = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / count;
    if count < 2.0 {
        return (mean, 0.0);
    }
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (count - 1.0);
    (mean, sqrt(var / count))
}

fn rate(flags: impl Iterator<Item = Option<bool>>) -> (Option<f64>, Option<f64>, u64) {
    let (mut hits, mut total, mut missing) = (0u64, 0u64, 0u64);
    for f in flags {
        match f {
            Some(true) => {
                hits += 1;
                total += 1;
            }
            Some(false) => total += 1,
            None => missing += 1,
        }
    }
    if total == 0 {
        return (None, None, missing);
    }
    let p = hits as f64 / total as f64;
    (Some(p), Some(binomial_se(p, total)), missing)
}

/// `sqrt(p (1 - p) / reps)`.
pub fn binomial_se(p: f64, reps: u64) -> f64 {
    sqrt(p * (1.0 - p) / reps as f64)
}

fn summarise(
    plan: &SimPlan,
    limits: &AsymptoticLimits,
    outcomes: &[ReplicationOutcome],
    idx: usize,
    kind: VarianceKind,
) -> EstimatorSummary {
    let n = plan.n as f64;
    let estimates = outcomes.iter().map(|o| o.estimate_for(kind));
    let (mean_estimate, mean_estimate_se) = mean_and_se(estimates.clone());
    // n (x - mean)^2 has mean (R - 1)/R times the n-scaled sample variance.
    let reps = outcomes.len() as f64;
    let squared = estimates.map(|x| n * (x - mean_estimate) * (x - mean_estimate));
    let (mean_sq, mean_sq_se) = mean_and_se(squared);
    let correction = if reps > 1.0 { reps / (reps - 1.0) } else { 1.0 };
    let (mean_n_var_hat, mean_n_var_hat_se) =
        mean_and_se(outcomes.iter().map(|o| n * o.kinds[idx].variance));
    let (rejection_rate, rejection_se, degenerate) =
        rate(outcomes.iter().map(|o| o.kinds[idx].rejected));
    let (coverage, coverage_se, _) = rate(outcomes.iter().map(|o| o.kinds[idx].covered));
    let (thm1, plim_n_var_hat) = limits.limits_for(kind);
    EstimatorSummary {
        estimator: kind,
        mean_estimate,
        mean_estimate_se,
        empirical_n_variance: mean_sq * correction,
        empirical_n_variance_se: mean_sq_se * correction,
        mean_n_var_hat,
        mean_n_var_hat_se,
        rejection_rate,
        rejection_se,
        coverage,
        coverage_se,
        degenerate_inference: degenerate,
        thm1,
        plim_n_var_hat,
        predicted_rejection: limits.predicted_rejection(kind, plan.level),
    }
}

/// Tolerances used to judge a summary against its predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    /// Allowed deviation in Monte Carlo standard errors.
    pub mc_se: f64,
    /// Allowed relative deviation of the mean estimated variance from its
    /// probability limit.
    pub relative_variance: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            mc_se: 3.0,
            relative_variance: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    pub expected: f64,
    pub allowed: f64,
    pub pass: bool,
}

impl Check {
    pub fn within(name: impl Into<String>, observed: f64, expected: f64, allowed: f64) -> Self {
        Check {
            name: name.into(),
            observed,
            expected,
            allowed,
            pass: fabs(observed - expected) <= allowed,
        }
    }
}

impl EstimatorSummary {
    /// Checks of this summary against its limits. Rate checks use the
    /// binomial standard error at the predicted rate.
    pub fn checks(&self, reps: u64, tolerance: &Tolerance) -> Vec<Check> {
        let mut checks = vec![
            Check::within(
                "empirical_n_variance_vs_thm1",
                self.empirical_n_variance,
                self.thm1,
                tolerance.mc_se * self.empirical_n_variance_se,
            ),
            Check::within(
                "mean_n_var_hat_vs_limit",
                self.mean_n_var_hat,
                self.plim_n_var_hat,
                tolerance.relative_variance * fabs(self.plim_n_var_hat),
            ),
        ];
        if let (Some(rej), Some(cov)) = (self.rejection_rate, self.coverage) {
            let se = binomial_se(self.predicted_rejection, reps);
            checks.push(Check::within(
                "rejection_vs_predicted",
                rej,
                self.predicted_rejection,
                tolerance.mc_se * se,
            ));
            checks.push(Check::within(
                "coverage_vs_predicted",
                cov,
                1.0 - self.predicted_rejection,
                tolerance.mc_se * se,
            ));
        }
        checks
    }

    pub fn verdict(&self, reps: u64, tolerance: &Tolerance) -> bool {
        self.checks(reps, tolerance).iter().all(|c| c.pass)
    }
}
