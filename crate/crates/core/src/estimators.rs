//! Point estimators for the treatment effect and the competing variance
//! estimators for the ANCOVA coefficient.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use libm::{erfc, fabs, sqrt};
use serde::{Deserialize, Serialize};

use crate::data::{design_matrix, TrialDataset};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, norm, Qr};
use crate::special::{normal_quantile, student_t_quantile, student_t_two_sided};

/// Designs whose two-norm condition number exceeds this are refused.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Difference in arm sample means. Both arms are non-empty for any
/// [`TrialDataset`].
pub fn unadjusted_estimate(data: &TrialDataset) -> f64 {
    let (mut s1, mut s0, mut n1, mut n0) = (0.0, 0.0, 0usize, 0usize);
    for (&y, &a) in data.outcomes().iter().zip(data.arms()) {
        if a == 1 {
            s1 += y;
            n1 += 1;
        } else {
            s0 += y;
            n0 += 1;
        }
    }
    s1 / n1 as f64 - s0 / n0 as f64
}

/// OLS fit of `Y` on `[1, A, W]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AncovaFit {
    pub beta0: f64,
    /// Treatment coefficient; this is the ANCOVA effect estimate.
    pub beta_a: f64,
    pub beta_w: Vec<f64>,
    pub residuals: Vec<f64>,
    pub n: usize,
    pub k: usize,
    pub pi_hat: f64,
    pub condition_number: f64,
    /// `[(X^T X)^{-1}]_{AA}`, equal to `1 / (A^T M A)` with `M` the
    /// projection off `[1, W]`.
    pub inverse_gram_arm: f64,
}

impl AncovaFit {
    pub fn rss(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum()
    }

    /// Residual degrees of freedom `n - k - 2`.
    pub fn residual_dof(&self) -> usize {
        self.n - self.k - 2
    }

    fn check_matches(&self, data: &TrialDataset) -> Result<()> {
        if self.n != data.n() || self.k != data.k() {
            return Err(Error::Dimension(format!(
                "fit is for n={}, k={} but dataset has n={}, k={}",
                self.n,
                self.k,
                data.n(),
                data.k()
            )));
        }
        Ok(())
    }
}

/// Least-squares fit via Householder QR. Refuses rank-deficient designs
/// (naming the dependent column) and designs with condition number above
/// [`CONDITION_LIMIT`].
pub fn ancova_fit(data: &TrialDataset) -> Result<AncovaFit> {
    let n = data.n();
    let k = data.k();
    if n < k + 3 {
        return Err(Error::TooFewObservations {
            n,
            params: k + 2,
            required: k + 3,
        });
    }
    let x = design_matrix(data);
    let qr = Qr::factor(x.values(), n, x.column_labels())?;
    let condition = qr.condition_number();
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::IllConditioned {
            condition,
            limit: CONDITION_LIMIT,
        });
    }
    let (coef, mut residuals) = qr.least_squares(data.outcomes());
    // An outcome inside the column space up to rounding fits exactly.
    let floor = 4.0 * n as f64 * f64::EPSILON * norm(data.outcomes());
    if norm(&residuals) <= floor {
        residuals.iter_mut().for_each(|r| *r = 0.0);
    }
    Ok(AncovaFit {
        beta0: coef[0],
        beta_a: coef[1],
        beta_w: coef[2..].to_vec(),
        residuals,
        n,
        k,
        pi_hat: data.pi_hat(),
        condition_number: condition,
        inverse_gram_arm: qr.inverse_gram_diagonal(1),
    })
}

/// Which estimator produced a [`VarianceEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceKind {
    /// Residual variance over `(n - 1)` times the adjusted variance of `A`,
    /// every sample moment with denominator `n - 1`.
    ModelBasedPaper,
    /// `s^2 [(X^T X)^{-1}]_{AA}` with `s^2 = RSS / (n - k - 2)`.
    ModelBasedClassical,
    /// Mean square of the empirical influence function over `n`.
    SandwichIf,
    /// [`VarianceKind::SandwichIf`] scaled by `n / (n - k - 2)`.
    SandwichIfDf,
    /// `s1^2/n1 + s0^2/n0` for the unadjusted estimate.
    Welch,
    /// Pooled two-sample t variance for the unadjusted estimate.
    PooledT,
}

/// The point estimate a variance kind refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateTarget {
    Ancova,
    Unadjusted,
}

impl VarianceKind {
    pub const ALL: [VarianceKind; 6] = [
        VarianceKind::ModelBasedPaper,
        VarianceKind::ModelBasedClassical,
        VarianceKind::SandwichIf,
        VarianceKind::SandwichIfDf,
        VarianceKind::Welch,
        VarianceKind::PooledT,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VarianceKind::ModelBasedPaper => "model_based_paper",
            VarianceKind::ModelBasedClassical => "model_based_classical",
            VarianceKind::SandwichIf => "sandwich_if",
            VarianceKind::SandwichIfDf => "sandwich_if_df",
            VarianceKind::Welch => "welch",
            VarianceKind::PooledT => "pooled_t",
        }
    }

    pub fn target(self) -> EstimateTarget {
        match self {
            VarianceKind::Welch | VarianceKind::PooledT => EstimateTarget::Unadjusted,
            _ => EstimateTarget::Ancova,
        }
    }

    /// True for the homoscedastic-model estimators, whose `n * V` converges
    /// to the weight-swapped limit rather than the true asymptotic variance.
    pub fn is_model_based(self) -> bool {
        matches!(
            self,
            VarianceKind::ModelBasedPaper | VarianceKind::ModelBasedClassical | VarianceKind::PooledT
        )
    }
}

impl fmt::Display for VarianceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VarianceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VarianceKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| {
                Error::invalid(
                    "estimators",
                    format!(
                        "unknown estimator `{s}` (expected one of model_based_paper, model_based_classical, sandwich_if, sandwich_if_df, welch, pooled_t)"
                    ),
                )
            })
    }
}

/// Reference distribution for Wald tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    #[default]
    Normal,
    /// Student t on the estimate's `dof`.
    StudentT,
}

/// Estimated variance of a treatment-effect estimate (not scaled by `n`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub value: f64,
    pub kind: VarianceKind,
    /// Degrees of freedom natural to the estimator, used when `reference`
    /// is [`Reference::StudentT`]. Welch carries the Satterthwaite value.
    pub dof: f64,
    pub reference: Reference,
}

impl VarianceEstimate {
    fn new(value: f64, kind: VarianceKind, dof: f64) -> Self {
        VarianceEstimate {
            value,
            kind,
            dof,
            reference: Reference::Normal,
        }
    }

    pub fn with_reference(mut self, reference: Reference) -> Self {
        self.reference = reference;
        self
    }

    pub fn std_error(&self) -> f64 {
        sqrt(self.value)
    }
}

struct SampleMoments {
    n: usize,
    // Sum of squared deviations.
    ss: f64,
}

fn arm_moments(data: &TrialDataset, arm: u8) -> SampleMoments {
    let ys = || {
        data.outcomes()
            .iter()
            .zip(data.arms())
            .filter(move |(_, &a)| a == arm)
            .map(|(&y, _)| y)
    };
    let n = ys().count();
    let mean = ys().sum::<f64>() / n as f64;
    let ss = ys().map(|y| (y - mean) * (y - mean)).sum();
    SampleMoments { n, ss }
}

/// Model-based variance with every sample moment on `n - 1` denominators:
///
/// `Var(r) / ((n - 1) [Var(A) - Cov(W, A)^T Var(W)^{-1} Cov(W, A)])`.
///
/// Algebraically this is `RSS / ((n - 1) A^T M A)`, i.e. the classical
/// estimate times `(n - k - 2) / (n - 1)`.
pub fn model_based_variance(data: &TrialDataset, fit: &AncovaFit) -> Result<VarianceEstimate> {
    fit.check_matches(data)?;
    let n = data.n();
    let k = data.k();
    let nm1 = (n - 1) as f64;

    let r_mean = fit.residuals.iter().sum::<f64>() / n as f64;
    let var_r = fit
        .residuals
        .iter()
        .map(|r| (r - r_mean) * (r - r_mean))
        .sum::<f64>()
        / nm1;

    let a: Vec<f64> = data.arms().iter().map(|&a| f64::from(a)).collect();
    let a_mean = a.iter().sum::<f64>() / n as f64;
    let var_a = a.iter().map(|x| (x - a_mean) * (x - a_mean)).sum::<f64>() / nm1;

    let mut adjusted = var_a;
    if k > 0 {
        let w = data.covariates();
        let mut w_mean = vec![0.0; k];
        for i in 0..n {
            for j in 0..k {
                w_mean[j] += w[i * k + j];
            }
        }
        for m in &mut w_mean {
            *m /= n as f64;
        }
        let mut var_w = vec![0.0; k * k];
        let mut cov_wa = vec![0.0; k];
        for i in 0..n {
            let da = a[i] - a_mean;
            for j in 0..k {
                let dj = w[i * k + j] - w_mean[j];
                cov_wa[j] += dj * da;
                for l in 0..=j {
                    var_w[j * k + l] += dj * (w[i * k + l] - w_mean[l]);
                }
            }
        }
        for j in 0..k {
            cov_wa[j] /= nm1;
            for l in 0..=j {
                var_w[j * k + l] /= nm1;
                var_w[l * k + j] = var_w[j * k + l];
            }
        }
        let chol = cholesky(&var_w, k)?;
        let solved = cholesky_solve(&chol, k, &cov_wa);
        adjusted -= cov_wa.iter().zip(&solved).map(|(c, s)| c * s).sum::<f64>();
    }
    if !(adjusted > 0.0) {
        return Err(Error::DegenerateArm(adjusted));
    }
    Ok(VarianceEstimate::new(
        var_r / (nm1 * adjusted),
        VarianceKind::ModelBasedPaper,
        fit.residual_dof() as f64,
    ))
}

/// The software-default OLS variance `s^2 [(X^T X)^{-1}]_{AA}`,
/// `s^2 = RSS / (n - k - 2)`.
pub fn model_based_classical(data: &TrialDataset, fit: &AncovaFit) -> Result<VarianceEstimate> {
    fit.check_matches(data)?;
    let dof = fit.residual_dof() as f64;
    let s2 = fit.rss() / dof;
    Ok(VarianceEstimate::new(
        s2 * fit.inverse_gram_arm,
        VarianceKind::ModelBasedClassical,
        dof,
    ))
}

/// Source of the randomisation probability in the influence function.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PiSource {
    /// Sample proportion treated.
    #[default]
    Estimated,
    /// Known design probability.
    Design(f64),
}

/// Plug-in influence values `(A_i - pi) / (pi (1 - pi)) * r_i`.
///
/// With [`PiSource::Estimated`] the values sum to zero, because OLS residuals
/// sum to zero within each arm.
pub fn empirical_influence(
    data: &TrialDataset,
    fit: &AncovaFit,
    pi_source: PiSource,
) -> Result<Vec<f64>> {
    fit.check_matches(data)?;
    let pi = match pi_source {
        PiSource::Estimated => fit.pi_hat,
        PiSource::Design(p) => {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::invalid("pi", format!("{p} is outside (0, 1)")));
            }
            p
        }
    };
    let denom = pi * (1.0 - pi);
    Ok(data
        .arms()
        .iter()
        .zip(&fit.residuals)
        .map(|(&a, r)| (f64::from(a) - pi) / denom * r)
        .collect())
}

/// Finite-sample scaling applied to the sandwich variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SandwichCorrection {
    None,
    /// Multiply by `n / (n - k - 2)`.
    #[default]
    Df,
}

/// Influence-function sandwich variance `sum(IF_i^2) / n^2`, optionally
/// scaled by `n / (n - k - 2)`.
///
/// Without covariates and with the estimated `pi`, the uncorrected value is
/// exactly `sum_a (n_a - 1) / n_a * s_a^2 / n_a`, so it sits below the Welch
/// variance by a factor in `[1 - 1 / min(n1, n0), 1]`. For balanced arms the
/// `Df` correction makes it equal to Welch.
pub fn sandwich_variance(
    data: &TrialDataset,
    fit: &AncovaFit,
    correction: SandwichCorrection,
) -> Result<VarianceEstimate> {
    sandwich_variance_with_pi(data, fit, correction, PiSource::Estimated)
}

pub fn sandwich_variance_with_pi(
    data: &TrialDataset,
    fit: &AncovaFit,
    correction: SandwichCorrection,
    pi_source: PiSource,
) -> Result<VarianceEstimate> {
    let influence = empirical_influence(data, fit, pi_source)?;
    let n = data.n() as f64;
    let base = influence.iter().map(|v| v * v).sum::<f64>() / (n * n);
    let dof = fit.residual_dof() as f64;
    Ok(match correction {
        SandwichCorrection::None => VarianceEstimate::new(base, VarianceKind::SandwichIf, dof),
        SandwichCorrection::Df => {
            VarianceEstimate::new(base * n / dof, VarianceKind::SandwichIfDf, dof)
        }
    })
}

/// Welch variance `s1^2/n1 + s0^2/n0` of the difference in means, with the
/// Welch-Satterthwaite degrees of freedom.
pub fn welch_variance(data: &TrialDataset) -> Result<VarianceEstimate> {
    let t = arm_moments(data, 1);
    let c = arm_moments(data, 0);
    for (arm, m) in [(1u8, &t), (0u8, &c)] {
        if m.n < 2 {
            return Err(Error::ArmTooSmall {
                arm,
                count: m.n,
                required: 2,
            });
        }
    }
    let v1 = t.ss / (t.n - 1) as f64 / t.n as f64;
    let v0 = c.ss / (c.n - 1) as f64 / c.n as f64;
    let value = v1 + v0;
    let dof = if value > 0.0 {
        value * value / (v1 * v1 / (t.n - 1) as f64 + v0 * v0 / (c.n - 1) as f64)
    } else {
        (data.n() - 2) as f64
    };
    Ok(VarianceEstimate::new(value, VarianceKind::Welch, dof))
}

/// Pooled two-sample t variance `s_p^2 (1/n1 + 1/n0)`, `s_p^2` on `n - 2`
/// degrees of freedom.
pub fn pooled_t_variance(data: &TrialDataset) -> Result<VarianceEstimate> {
    let n = data.n();
    if n < 3 {
        return Err(Error::TooFewObservations {
            n,
            params: 2,
            required: 3,
        });
    }
    let t = arm_moments(data, 1);
    let c = arm_moments(data, 0);
    let dof = (n - 2) as f64;
    let s2 = (t.ss + c.ss) / dof;
    Ok(VarianceEstimate::new(
        s2 * (1.0 / t.n as f64 + 1.0 / c.n as f64),
        VarianceKind::PooledT,
        dof,
    ))
}

/// Computes the requested variance kind, fitting nothing new: `fit` must be
/// the ANCOVA fit of `data`.
pub fn variance_of_kind(
    data: &TrialDataset,
    fit: &AncovaFit,
    kind: VarianceKind,
) -> Result<VarianceEstimate> {
    match kind {
        VarianceKind::ModelBasedPaper => model_based_variance(data, fit),
        VarianceKind::ModelBasedClassical => model_based_classical(data, fit),
        VarianceKind::SandwichIf => sandwich_variance(data, fit, SandwichCorrection::None),
        VarianceKind::SandwichIfDf => sandwich_variance(data, fit, SandwichCorrection::Df),
        VarianceKind::Welch => welch_variance(data),
        VarianceKind::PooledT => pooled_t_variance(data),
    }
}

/// Two-sided Wald test and confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaldResult {
    pub estimate: f64,
    pub std_error: f64,
    pub statistic: f64,
    pub p_value: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub level: f64,
}

impl WaldResult {
    pub fn rejects(&self) -> bool {
        self.p_value < 1.0 - self.level
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci_lower <= value && value <= self.ci_upper
    }
}

/// Critical value of the reference distribution for a two-sided test at
/// confidence `level`.
pub fn critical_value(variance: &VarianceEstimate, level: f64) -> f64 {
    let upper = 1.0 - (1.0 - level) / 2.0;
    match variance.reference {
        Reference::Normal => normal_quantile(upper),
        Reference::StudentT => student_t_quantile(upper, variance.dof),
    }
}

/// Wald test of `estimate == null_value` with a `level` confidence interval.
pub fn wald_test(
    estimate: f64,
    variance: &VarianceEstimate,
    null_value: f64,
    level: f64,
) -> Result<WaldResult> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("level", format!("{level} is outside (0, 1)")));
    }
    let critical = critical_value(variance, level);
    wald_with_critical(estimate, variance, null_value, level, critical)
}

pub(crate) fn wald_with_critical(
    estimate: f64,
    variance: &VarianceEstimate,
    null_value: f64,
    level: f64,
    critical: f64,
) -> Result<WaldResult> {
    if !(variance.value > 0.0) || !variance.value.is_finite() {
        return Err(Error::ZeroVariance(variance.value));
    }
    let se = sqrt(variance.value);
    let statistic = (estimate - null_value) / se;
    let p_value = match variance.reference {
        Reference::Normal => erfc(fabs(statistic) * core::f64::consts::FRAC_1_SQRT_2),
        Reference::StudentT => student_t_two_sided(statistic, variance.dof),
    };
    Ok(WaldResult {
        estimate,
        std_error: se,
        statistic,
        p_value: p_value.clamp(0.0, 1.0),
        ci_lower: estimate - critical * se,
        ci_upper: estimate + critical * se,
        level,
    })
}
