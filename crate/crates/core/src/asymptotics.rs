//! Population quantities for a [`DgpSpec`]: probability-limit regression
//! coefficients, the true asymptotic variance of the ANCOVA estimate, the
//! probability limit of the model-based variance, and the resulting bias
//! diagnosis.
//!
//! With `v_a = Var(Y - bW^T W | A = a)` for the limiting covariate slopes
//! `bW`:
//!
//! * true asymptotic variance of `sqrt(n) (est - delta)`: `v1 / pi + v0 / (1 - pi)`
//! * limit of `n` times the model-based variance: `v1 / (1 - pi) + v0 / pi`
//!
//! The two coincide when `pi = 1/2` or `v1 = v0`. Linear specs with constant
//! noise use closed forms; anything else goes through [`brute_force_limits`],
//! which simulates one very large sample.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{erfc, fabs, sqrt};
use serde::{Deserialize, Serialize};

use crate::dgp::DgpSpec;
use crate::error::{Error, Result};
use crate::estimators::{EstimateTarget, VarianceKind};
use crate::exec::{Executor, Sequential};
use crate::linalg::solve_dense;
use crate::rng::{stream_id, tag, Stream};
use crate::special::normal_quantile;

/// Relative tolerance under which the two limits are declared equal.
pub const EXACT_TOLERANCE: f64 = 1e-12;

/// Draws per brute-force work unit.
pub const CHUNK_DRAWS: u64 = 1 << 16;

pub const MIN_BRUTE_FORCE_DRAWS: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationCoefficients {
    pub beta0: f64,
    pub beta_a: f64,
    pub beta_w: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitRoute {
    Analytic,
    BruteForce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasDirection {
    /// Model-based variance too large: type I error below nominal.
    Conservative,
    /// Model-based variance too small: type I error above nominal.
    Anticonservative,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub direction: BiasDirection,
    pub predicted_type1: f64,
}

/// Per-arm residual variances and the two limits built from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceLimits {
    pub v1: f64,
    pub v0: f64,
    pub thm1_value: f64,
    pub thm2_value: f64,
}

impl VarianceLimits {
    pub fn new(v1: f64, v0: f64, pi: f64) -> Self {
        VarianceLimits {
            v1,
            v0,
            thm1_value: v1 / pi + v0 / (1.0 - pi),
            thm2_value: v1 / (1.0 - pi) + v0 / pi,
        }
    }
}

/// Monte Carlo standard errors of brute-force limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitStandardErrors {
    pub beta0: f64,
    pub beta_a: f64,
    pub beta_w: Vec<f64>,
    pub v1: f64,
    pub v0: f64,
    pub thm1_value: f64,
    pub thm2_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticLimits {
    pub pi: f64,
    pub delta: f64,
    pub beta_under: PopulationCoefficients,
    /// `Var(Y - bW^T W | A = 1)`.
    pub v1: f64,
    /// `Var(Y - bW^T W | A = 0)`.
    pub v0: f64,
    /// `n` times the asymptotic variance of the ANCOVA estimate.
    pub thm1_value: f64,
    /// Probability limit of `n` times the model-based variance.
    pub thm2_value: f64,
    pub bias_ratio: f64,
    pub diagnosis: Diagnosis,
    pub level: f64,
    pub route: LimitRoute,
    /// The same limits for the unadjusted difference in means (slopes fixed
    /// at zero).
    pub unadjusted: VarianceLimits,
    pub standard_errors: Option<LimitStandardErrors>,
}

impl AsymptoticLimits {
    fn assemble(
        dgp: &DgpSpec,
        beta_under: PopulationCoefficients,
        adjusted: VarianceLimits,
        unadjusted: VarianceLimits,
        route: LimitRoute,
        standard_errors: Option<LimitStandardErrors>,
    ) -> Self {
        let level = 0.95;
        AsymptoticLimits {
            pi: dgp.pi,
            delta: dgp.delta(),
            beta_under,
            v1: adjusted.v1,
            v0: adjusted.v0,
            thm1_value: adjusted.thm1_value,
            thm2_value: adjusted.thm2_value,
            bias_ratio: ratio(adjusted.thm2_value, adjusted.thm1_value),
            diagnosis: diagnose(adjusted.thm1_value, adjusted.thm2_value, level),
            level,
            route,
            unadjusted,
            standard_errors,
        }
    }

    /// Re-evaluates the diagnosis at another confidence level.
    pub fn at_level(mut self, level: f64) -> Self {
        self.level = level;
        self.diagnosis = diagnose(self.thm1_value, self.thm2_value, level);
        self
    }

    pub fn adjusted(&self) -> VarianceLimits {
        VarianceLimits {
            v1: self.v1,
            v0: self.v0,
            thm1_value: self.thm1_value,
            thm2_value: self.thm2_value,
        }
    }

    /// `(true n * variance, probability limit of n * V)` for the estimate and
    /// variance estimator behind `kind`.
    pub fn limits_for(&self, kind: VarianceKind) -> (f64, f64) {
        let base = match kind.target() {
            EstimateTarget::Ancova => self.adjusted(),
            EstimateTarget::Unadjusted => self.unadjusted,
        };
        let plim = if kind.is_model_based() {
            base.thm2_value
        } else {
            base.thm1_value
        };
        (base.thm1_value, plim)
    }

    /// Asymptotic rejection rate of a nominal `level` Wald test built on
    /// `kind` under the null.
    pub fn predicted_rejection(&self, kind: VarianceKind, level: f64) -> f64 {
        let (truth, plim) = self.limits_for(kind);
        predicted_type1(truth, plim, level)
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == den {
        1.0
    } else {
        num / den
    }
}

/// Rejection probability of a normal-reference Wald test whose variance
/// converges to `plim` while the estimate's variance is `truth`:
/// `2 Phi(-z_{1 - alpha/2} sqrt(plim / truth))`.
pub fn predicted_type1(truth: f64, plim: f64, level: f64) -> f64 {
    if truth == plim || (truth == 0.0 && plim == 0.0) {
        return 1.0 - level;
    }
    let z = normal_quantile(1.0 - (1.0 - level) / 2.0);
    erfc(z * sqrt(plim / truth) * core::f64::consts::FRAC_1_SQRT_2)
}

fn diagnose(thm1: f64, thm2: f64, level: f64) -> Diagnosis {
    let scale = fabs(thm1).max(fabs(thm2));
    let direction = if fabs(thm1 - thm2) <= EXACT_TOLERANCE * scale {
        BiasDirection::Exact
    } else if thm2 < thm1 {
        BiasDirection::Anticonservative
    } else {
        BiasDirection::Conservative
    };
    let predicted_type1 = if direction == BiasDirection::Exact {
        1.0 - level
    } else {
        predicted_type1(thm1, thm2, level)
    };
    Diagnosis {
        direction,
        predicted_type1,
    }
}

/// Direction of the model-based bias and the predicted size of its Wald test
/// at confidence `level`.
pub fn bias_diagnosis(limits: &AsymptoticLimits, level: f64) -> Diagnosis {
    diagnose(limits.thm1_value, limits.thm2_value, level)
}

fn nonsingular_variances(dgp: &DgpSpec) -> Result<Vec<f64>> {
    let var_w = dgp.covariate_variances();
    if var_w.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::SingularCovariance);
    }
    Ok(var_w)
}

/// Closed-form limiting coefficients for linear arm means. With `A`
/// independent of `W` the slopes mix: `bW = pi b1 + (1 - pi) b0`, and the
/// treatment coefficient equals `delta`.
pub fn population_coefficients(dgp: &DgpSpec) -> Result<PopulationCoefficients> {
    dgp.validate()?;
    let (Some((c1, b1)), Some((c0, b0))) =
        (dgp.arm_mean.treated.as_linear(), dgp.arm_mean.control.as_linear())
    else {
        return Err(Error::invalid(
            "arm_mean",
            "closed-form coefficients need linear arm means; use the brute-force route",
        ));
    };
    nonsingular_variances(dgp)?;
    let pi = dgp.pi;
    let beta_w: Vec<f64> = b1
        .iter()
        .zip(b0)
        .map(|(x1, x0)| pi * x1 + (1.0 - pi) * x0)
        .collect();
    let means = dgp.covariate_means();
    let delta = dgp.delta();
    let mean_y = pi * (c1 + dot(b1, &means)) + (1.0 - pi) * (c0 + dot(b0, &means));
    let beta0 = mean_y - delta * pi - dot(&beta_w, &means);
    Ok(PopulationCoefficients {
        beta0,
        beta_a: delta,
        beta_w,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(b_a - s)^T Var(W) (b_a - s) + sigma_a^2` for independent coordinates.
fn linear_arm_variance(slopes: &[f64], reference: &[f64], var_w: &[f64], sd: f64) -> f64 {
    slopes
        .iter()
        .zip(reference)
        .zip(var_w)
        .map(|((b, s), v)| (b - s) * (b - s) * v)
        .sum::<f64>()
        + sd * sd
}

/// Closed-form limits; requires linear means and constant noise.
pub fn analytic_limits(dgp: &DgpSpec) -> Result<AsymptoticLimits> {
    let coefficients = population_coefficients(dgp)?;
    let (Some(sd1), Some(sd0)) = (
        dgp.noise_sd.treated.as_constant(),
        dgp.noise_sd.control.as_constant(),
    ) else {
        return Err(Error::invalid(
            "noise_sd",
            "closed-form limits need covariate-independent noise; use the brute-force route",
        ));
    };
    let var_w = nonsingular_variances(dgp)?;
    let (_, b1) = dgp.arm_mean.treated.as_linear().expect("checked linear");
    let (_, b0) = dgp.arm_mean.control.as_linear().expect("checked linear");
    let zeros = vec![0.0; dgp.k()];
    let adjusted = VarianceLimits::new(
        linear_arm_variance(b1, &coefficients.beta_w, &var_w, sd1),
        linear_arm_variance(b0, &coefficients.beta_w, &var_w, sd0),
        dgp.pi,
    );
    let unadjusted = VarianceLimits::new(
        linear_arm_variance(b1, &zeros, &var_w, sd1),
        linear_arm_variance(b0, &zeros, &var_w, sd0),
        dgp.pi,
    );
    Ok(AsymptoticLimits::assemble(
        dgp,
        coefficients,
        adjusted,
        unadjusted,
        LimitRoute::Analytic,
        None,
    ))
}

/// `v1 / pi + v0 / (1 - pi)`: `n` times the asymptotic variance of the
/// ANCOVA estimate (closed form).
pub fn theorem1_limit(dgp: &DgpSpec) -> Result<f64> {
    Ok(analytic_limits(dgp)?.thm1_value)
}

/// `v1 / (1 - pi) + v0 / pi`: probability limit of `n` times the model-based
/// variance (closed form).
pub fn theorem2_limit(dgp: &DgpSpec) -> Result<f64> {
    Ok(analytic_limits(dgp)?.thm2_value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BruteForceConfig {
    pub draws: u64,
    pub seed: u64,
}

impl Default for BruteForceConfig {
    fn default() -> Self {
        BruteForceConfig {
            draws: 10_000_000,
            seed: DEFAULT_ORACLE_SEED,
        }
    }
}

pub const DEFAULT_ORACLE_SEED: u64 = 0x0a11_ce5e_ed00_0001;

/// Closed form when available, brute force otherwise.
pub fn limits(dgp: &DgpSpec, config: &BruteForceConfig) -> Result<AsymptoticLimits> {
    limits_with(dgp, config, &Sequential)
}

pub fn limits_with<E: Executor>(
    dgp: &DgpSpec,
    config: &BruteForceConfig,
    executor: &E,
) -> Result<AsymptoticLimits> {
    dgp.validate()?;
    if dgp.is_analytic() {
        analytic_limits(dgp)
    } else {
        brute_force_limits_with(dgp, config, executor)
    }
}

/// Estimates every limit from one simulated sample of `config.draws`
/// observations: OLS for the coefficients, arm-wise sample variances of
/// `Y - bW^T W` for `v1, v0`. Standard errors use the fourth-moment formula
/// for the variances, the delta method (arms independent) for the limits and
/// a sandwich for the coefficients.
pub fn brute_force_limits(dgp: &DgpSpec, config: &BruteForceConfig) -> Result<AsymptoticLimits> {
    brute_force_limits_with(dgp, config, &Sequential)
}

/// Co-moments of `z = (A, W_1..W_k, Y)`.
#[derive(Debug, Clone)]
struct CrossMoments {
    count: f64,
    mean: Vec<f64>,
    // Row-major (k + 2) x (k + 2) sums of centred products.
    comoment: Vec<f64>,
}

impl CrossMoments {
    fn from_rows(rows: &[f64], dim: usize) -> Self {
        let count = (rows.len() / dim) as f64;
        let mut mean = vec![0.0; dim];
        for row in rows.chunks_exact(dim) {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= count;
        }
        let mut comoment = vec![0.0; dim * dim];
        let mut centred = vec![0.0; dim];
        for row in rows.chunks_exact(dim) {
            for ((c, x), m) in centred.iter_mut().zip(row).zip(&mean) {
                *c = x - m;
            }
            for i in 0..dim {
                for j in 0..=i {
                    comoment[i * dim + j] += centred[i] * centred[j];
                }
            }
        }
        for i in 0..dim {
            for j in 0..i {
                comoment[j * dim + i] = comoment[i * dim + j];
            }
        }
        CrossMoments {
            count,
            mean,
            comoment,
        }
    }

    // Chan et al. pairwise combination.
    fn merge(&mut self, other: &CrossMoments) {
        let dim = self.mean.len();
        let n = self.count + other.count;
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        let factor = self.count * other.count / n;
        for i in 0..dim {
            for j in 0..dim {
                self.comoment[i * dim + j] +=
                    other.comoment[i * dim + j] + delta[i] * delta[j] * factor;
            }
        }
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d * other.count / n;
        }
        self.count = n;
    }
}

/// Central moments up to order four.
#[derive(Debug, Clone, Copy, Default)]
struct CentralMoments {
    count: f64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl CentralMoments {
    fn from_values(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return CentralMoments::default();
        }
        let count = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / count;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for x in xs {
            let d = x - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        CentralMoments {
            count,
            mean,
            m2,
            m3,
            m4,
        }
    }

    // Pebay's pairwise update for the third and fourth central sums.
    fn merge(&mut self, o: &CentralMoments) {
        if o.count == 0.0 {
            return;
        }
        if self.count == 0.0 {
            *self = *o;
            return;
        }
        let (na, nb) = (self.count, o.count);
        let n = na + nb;
        let d = o.mean - self.mean;
        let d2 = d * d;
        let m2 = self.m2 + o.m2 + d2 * na * nb / n;
        let m3 = self.m3 + o.m3 + d2 * d * na * nb * (na - nb) / (n * n)
            + 3.0 * d * (na * o.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + o.m4
            + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * o.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * d * (na * o.m3 - nb * self.m3) / n;
        *self = CentralMoments {
            count: n,
            mean: self.mean + d * nb / n,
            m2,
            m3,
            m4,
        };
    }

    fn variance(&self) -> f64 {
        self.m2 / (self.count - 1.0)
    }

    /// Standard error of the sample variance, `sqrt((mu4 - sigma^4) / n)`.
    fn variance_se(&self) -> f64 {
        let mu2 = self.m2 / self.count;
        let mu4 = self.m4 / self.count;
        sqrt(((mu4 - mu2 * mu2) / self.count).max(0.0))
    }
}

#[derive(Debug, Clone)]
struct ResidualMoments {
    // Indexed by arm: [control, treated].
    adjusted: [CentralMoments; 2],
    unadjusted: [CentralMoments; 2],
    // Row-major (k + 2)^2 sum of e^2 x x^T over x = (1, A, W).
    meat: Vec<f64>,
}

fn chunk_bounds(draws: u64, chunk: u64) -> u64 {
    let start = chunk * CHUNK_DRAWS;
    (draws - start).min(CHUNK_DRAWS)
}

// Regenerates the draws of one chunk and hands each (w, a, y) to `visit`.
fn for_each_draw(
    dgp: &DgpSpec,
    config: &BruteForceConfig,
    chunk: u64,
    mut visit: impl FnMut(&[f64], u8, f64),
) {
    let size = chunk_bounds(config.draws, chunk);
    let mut s_w = Stream::new(config.seed, stream_id(chunk, 0, tag::COVARIATES));
    let mut s_a = Stream::new(config.seed, stream_id(chunk, 0, tag::ASSIGNMENT));
    let mut s_y = Stream::new(config.seed, stream_id(chunk, 0, tag::NOISE));
    let mut w = vec![0.0; dgp.k()];
    for _ in 0..size {
        let (a, y) = dgp.sample_observation(&mut s_w, &mut s_a, &mut s_y, &mut w);
        visit(&w, a, y);
    }
}

fn cross_moments_chunk(dgp: &DgpSpec, config: &BruteForceConfig, chunk: u64) -> CrossMoments {
    let dim = dgp.k() + 2;
    let mut rows = Vec::with_capacity(chunk_bounds(config.draws, chunk) as usize * dim);
    for_each_draw(dgp, config, chunk, |w, a, y| {
        rows.push(f64::from(a));
        rows.extend_from_slice(w);
        rows.push(y);
    });
    CrossMoments::from_rows(&rows, dim)
}

fn residual_moments_chunk(
    dgp: &DgpSpec,
    config: &BruteForceConfig,
    chunk: u64,
    beta: &PopulationCoefficients,
) -> ResidualMoments {
    let p = dgp.k() + 2;
    let mut adjusted: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut raw: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut meat = vec![0.0; p * p];
    let mut x = vec![0.0; p];
    for_each_draw(dgp, config, chunk, |w, a, y| {
        let u = y - dot(&beta.beta_w, w);
        adjusted[a as usize].push(u);
        raw[a as usize].push(y);
        let e = u - beta.beta0 - beta.beta_a * f64::from(a);
        x[0] = 1.0;
        x[1] = f64::from(a);
        x[2..].copy_from_slice(w);
        let e2 = e * e;
        for i in 0..p {
            for j in 0..p {
                meat[i * p + j] += e2 * x[i] * x[j];
            }
        }
    });
    ResidualMoments {
        adjusted: [
            CentralMoments::from_values(&adjusted[0]),
            CentralMoments::from_values(&adjusted[1]),
        ],
        unadjusted: [
            CentralMoments::from_values(&raw[0]),
            CentralMoments::from_values(&raw[1]),
        ],
        meat,
    }
}

pub fn brute_force_limits_with<E: Executor>(
    dgp: &DgpSpec,
    config: &BruteForceConfig,
    executor: &E,
) -> Result<AsymptoticLimits> {
    dgp.validate()?;
    if config.draws < MIN_BRUTE_FORCE_DRAWS {
        return Err(Error::invalid(
            "draws",
            format!("{} is below the minimum of {MIN_BRUTE_FORCE_DRAWS}", config.draws),
        ));
    }
    let k = dgp.k();
    let p = k + 2;
    let chunks = config.draws.div_ceil(CHUNK_DRAWS);

    // Pass 1: regression of Y on (1, A, W).
    let parts = executor.map_indexed(chunks, |c| cross_moments_chunk(dgp, config, c));
    let mut parts = parts.into_iter();
    let mut cross = parts.next().expect("at least one chunk");
    for part in parts {
        cross.merge(&part);
    }
    // Centred normal equations over x = (A, W), response Y at index p - 1.
    let dx = p - 1;
    let sxx: Vec<f64> = (0..dx)
        .flat_map(|i| (0..dx).map(move |j| (i, j)))
        .map(|(i, j)| cross.comoment[i * p + j])
        .collect();
    let sxy: Vec<f64> = (0..dx).map(|i| cross.comoment[i * p + dx]).collect();
    let slopes = solve_dense(&sxx, dx, &sxy)?;
    let beta0 = cross.mean[dx] - dot(&slopes, &cross.mean[..dx]);
    let beta = PopulationCoefficients {
        beta0,
        beta_a: slopes[0],
        beta_w: slopes[1..].to_vec(),
    };

    // Pass 2: arm-wise residual moments and the sandwich meat.
    let parts = executor.map_indexed(chunks, |c| residual_moments_chunk(dgp, config, c, &beta));
    let mut parts = parts.into_iter();
    let mut resid = parts.next().expect("at least one chunk");
    for part in parts {
        for arm in 0..2 {
            resid.adjusted[arm].merge(&part.adjusted[arm]);
            resid.unadjusted[arm].merge(&part.unadjusted[arm]);
        }
        for (m, o) in resid.meat.iter_mut().zip(&part.meat) {
            *m += o;
        }
    }
    for arm in 0..2u8 {
        if resid.adjusted[arm as usize].count < 2.0 {
            return Err(Error::ArmTooSmall {
                arm,
                count: resid.adjusted[arm as usize].count as usize,
                required: 2,
            });
        }
    }

    let pi = dgp.pi;
    let [control, treated] = resid.adjusted;
    let adjusted = VarianceLimits::new(treated.variance(), control.variance(), pi);
    let [raw_control, raw_treated] = resid.unadjusted;
    let unadjusted = VarianceLimits::new(raw_treated.variance(), raw_control.variance(), pi);

    let se_v1 = treated.variance_se();
    let se_v0 = control.variance_se();
    let thm1_se = sqrt(se_v1 * se_v1 / (pi * pi) + se_v0 * se_v0 / ((1.0 - pi) * (1.0 - pi)));
    let thm2_se = sqrt(se_v1 * se_v1 / ((1.0 - pi) * (1.0 - pi)) + se_v0 * se_v0 / (pi * pi));

    // Coefficient sandwich (X^T X)^{-1} meat (X^T X)^{-1}, rebuilt from the
    // pass-1 moments. Variables in `cross` are (A, W, Y); x is (1, A, W).
    let n = cross.count;
    let mut gram = vec![0.0; p * p];
    gram[0] = n;
    for i in 1..p {
        let mi = cross.mean[i - 1];
        gram[i] = n * mi;
        gram[i * p] = n * mi;
        for j in 1..p {
            gram[i * p + j] = cross.comoment[(i - 1) * p + (j - 1)] + n * mi * cross.mean[j - 1];
        }
    }
    let mut bread = vec![0.0; p * p];
    for j in 0..p {
        let mut e = vec![0.0; p];
        e[j] = 1.0;
        let col = solve_dense(&gram, p, &e)?;
        for i in 0..p {
            bread[i * p + j] = col[i];
        }
    }
    let mut coef_se = vec![0.0; p];
    for (i, se) in coef_se.iter_mut().enumerate() {
        let mut v = 0.0;
        for a in 0..p {
            for b in 0..p {
                v += bread[i * p + a] * resid.meat[a * p + b] * bread[b * p + i];
            }
        }
        *se = sqrt(v.max(0.0));
    }

    let standard_errors = LimitStandardErrors {
        beta0: coef_se[0],
        beta_a: coef_se[1],
        beta_w: coef_se[2..].to_vec(),
        v1: se_v1,
        v0: se_v0,
        thm1_value: thm1_se,
        thm2_value: thm2_se,
    };
    Ok(AsymptoticLimits::assemble(
        dgp,
        beta,
        adjusted,
        unadjusted,
        LimitRoute::BruteForce,
        Some(standard_errors),
    ))
}
