//! Generative description of a two-arm trial: covariate law, randomisation
//! probability, per-arm mean functions and noise.
//!
//! Mean and noise functions come from a small closed catalogue so that a
//! [`DgpSpec`] serialises deterministically.

use alloc::format;
use alloc::vec::Vec;

use libm::{exp, expm1, fabs, sqrt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::special::{normal_cdf, normal_pdf, normal_quantile, normal_sf};

/// Law of one covariate coordinate. Coordinates are independent and every
/// law has bounded support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CoordinateLaw {
    Uniform { low: f64, high: f64 },
    TruncatedNormal { mean: f64, sd: f64, low: f64, high: f64 },
    Discrete { values: Vec<f64>, probs: Vec<f64> },
}

struct Truncation {
    alpha: f64,
    beta: f64,
    mass: f64,
}

fn truncation(mean: f64, sd: f64, low: f64, high: f64) -> Truncation {
    let alpha = (low - mean) / sd;
    let beta = (high - mean) / sd;
    // Difference taken on the side with less cancellation.
    let mass = if alpha > 0.0 {
        normal_sf(alpha) - normal_sf(beta)
    } else {
        normal_cdf(beta) - normal_cdf(alpha)
    };
    Truncation { alpha, beta, mass }
}

impl CoordinateLaw {
    pub fn mean(&self) -> f64 {
        match self {
            CoordinateLaw::Uniform { low, high } => 0.5 * (low + high),
            CoordinateLaw::TruncatedNormal { mean, sd, low, high } => {
                let t = truncation(*mean, *sd, *low, *high);
                mean + sd * (normal_pdf(t.alpha) - normal_pdf(t.beta)) / t.mass
            }
            CoordinateLaw::Discrete { values, probs } => {
                values.iter().zip(probs).map(|(v, p)| v * p).sum()
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            CoordinateLaw::Uniform { low, high } => (high - low) * (high - low) / 12.0,
            CoordinateLaw::TruncatedNormal { mean, sd, low, high } => {
                let t = truncation(*mean, *sd, *low, *high);
                let pa = normal_pdf(t.alpha);
                let pb = normal_pdf(t.beta);
                let shift = (pa - pb) / t.mass;
                sd * sd * (1.0 + (t.alpha * pa - t.beta * pb) / t.mass - shift * shift)
            }
            CoordinateLaw::Discrete { values, probs } => {
                let m = self.mean();
                values
                    .iter()
                    .zip(probs)
                    .map(|(v, p)| p * (v - m) * (v - m))
                    .sum()
            }
        }
    }

    pub fn second_moment(&self) -> f64 {
        let m = self.mean();
        self.variance() + m * m
    }

    /// Moment generating function `E exp(t W)`.
    pub fn mgf(&self, t: f64) -> f64 {
        match self {
            CoordinateLaw::Uniform { low, high } => {
                let width = high - low;
                if t * width == 0.0 {
                    1.0
                } else {
                    exp(t * low) * expm1(t * width) / (t * width)
                }
            }
            CoordinateLaw::TruncatedNormal { mean, sd, low, high } => {
                let base = truncation(*mean, *sd, *low, *high);
                let shifted = truncation(*mean + sd * sd * t, *sd, *low, *high);
                exp(mean * t + 0.5 * sd * sd * t * t) * shifted.mass / base.mass
            }
            CoordinateLaw::Discrete { values, probs } => {
                values.iter().zip(probs).map(|(v, p)| p * exp(t * v)).sum()
            }
        }
    }

    /// Draw by inversion of one uniform `u` in `(0, 1)`.
    pub fn sample(&self, u: f64) -> f64 {
        match self {
            CoordinateLaw::Uniform { low, high } => low + (high - low) * u,
            CoordinateLaw::TruncatedNormal { mean, sd, low, high } => {
                let t = truncation(*mean, *sd, *low, *high);
                let z = if t.alpha > 0.0 {
                    -normal_quantile(normal_sf(t.alpha) - u * t.mass)
                } else {
                    normal_quantile(normal_cdf(t.alpha) + u * t.mass)
                };
                (mean + sd * z).clamp(*low, *high)
            }
            CoordinateLaw::Discrete { values, probs } => {
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().expect("validated non-empty")
            }
        }
    }

    fn validate(&self, path: &str) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{path}.{name}"), "must be finite (covariates are bounded)"))
            }
        };
        match self {
            CoordinateLaw::Uniform { low, high } => {
                finite("low", *low)?;
                finite("high", *high)?;
                if !(low < high) {
                    return Err(Error::invalid(format!("{path}.high"), "must exceed low"));
                }
            }
            CoordinateLaw::TruncatedNormal { mean, sd, low, high } => {
                finite("mean", *mean)?;
                finite("sd", *sd)?;
                finite("low", *low)?;
                finite("high", *high)?;
                if !(*sd > 0.0) {
                    return Err(Error::invalid(format!("{path}.sd"), "must be positive"));
                }
                if !(low < high) {
                    return Err(Error::invalid(format!("{path}.high"), "must exceed low"));
                }
                if !(truncation(*mean, *sd, *low, *high).mass > 0.0) {
                    return Err(Error::invalid(path, "truncation interval carries no mass"));
                }
            }
            CoordinateLaw::Discrete { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err(Error::invalid(
                        format!("{path}.probs"),
                        "values and probs must be non-empty and of equal length",
                    ));
                }
                if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                    return Err(Error::invalid(format!("{path}.values[{i}]"), "must be finite"));
                }
                if let Some(i) = probs.iter().position(|p| !(*p >= 0.0 && *p <= 1.0)) {
                    return Err(Error::invalid(format!("{path}.probs[{i}]"), "must lie in [0, 1]"));
                }
                let total: f64 = probs.iter().sum();
                if fabs(total - 1.0) > 1e-12 {
                    return Err(Error::invalid(
                        format!("{path}.probs"),
                        format!("must sum to 1 (sum is {total})"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Catalogue of per-arm mean functions `m(W)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MeanForm {
    /// `c + b^T W`
    Linear { intercept: f64, slopes: Vec<f64> },
    /// `c + b^T W + sum_j q_j W_j^2`
    Quadratic {
        intercept: f64,
        slopes: Vec<f64>,
        curvature: Vec<f64>,
    },
    /// `c + b^T W + g W_1 W_2`
    Interaction {
        intercept: f64,
        slopes: Vec<f64>,
        coefficient: f64,
    },
    /// `c + s exp(r^T W)`, bounded because `W` is.
    ExponentialBounded {
        intercept: f64,
        scale: f64,
        rates: Vec<f64>,
    },
}

fn linear_part(intercept: f64, slopes: &[f64], w: &[f64]) -> f64 {
    intercept + slopes.iter().zip(w).map(|(b, x)| b * x).sum::<f64>()
}

impl MeanForm {
    pub fn eval(&self, w: &[f64]) -> f64 {
        match self {
            MeanForm::Linear { intercept, slopes } => linear_part(*intercept, slopes, w),
            MeanForm::Quadratic {
                intercept,
                slopes,
                curvature,
            } => {
                linear_part(*intercept, slopes, w)
                    + curvature.iter().zip(w).map(|(q, x)| q * x * x).sum::<f64>()
            }
            MeanForm::Interaction {
                intercept,
                slopes,
                coefficient,
            } => linear_part(*intercept, slopes, w) + coefficient * w[0] * w[1],
            MeanForm::ExponentialBounded {
                intercept,
                scale,
                rates,
            } => intercept + scale * exp(rates.iter().zip(w).map(|(r, x)| r * x).sum::<f64>()),
        }
    }

    /// `E m(W)` under independent coordinates.
    pub fn expectation(&self, laws: &[CoordinateLaw]) -> f64 {
        let linear = |intercept: f64, slopes: &[f64]| {
            intercept + slopes.iter().zip(laws).map(|(b, l)| b * l.mean()).sum::<f64>()
        };
        match self {
            MeanForm::Linear { intercept, slopes } => linear(*intercept, slopes),
            MeanForm::Quadratic {
                intercept,
                slopes,
                curvature,
            } => {
                linear(*intercept, slopes)
                    + curvature
                        .iter()
                        .zip(laws)
                        .map(|(q, l)| q * l.second_moment())
                        .sum::<f64>()
            }
            MeanForm::Interaction {
                intercept,
                slopes,
                coefficient,
            } => linear(*intercept, slopes) + coefficient * laws[0].mean() * laws[1].mean(),
            MeanForm::ExponentialBounded {
                intercept,
                scale,
                rates,
            } => {
                intercept
                    + scale
                        * rates
                            .iter()
                            .zip(laws)
                            .map(|(r, l)| l.mgf(*r))
                            .product::<f64>()
            }
        }
    }

    /// `(intercept, slopes)` when the form is linear.
    pub fn as_linear(&self) -> Option<(f64, &[f64])> {
        match self {
            MeanForm::Linear { intercept, slopes } => Some((*intercept, slopes)),
            _ => None,
        }
    }

    fn validate(&self, path: &str, k: usize) -> Result<()> {
        let check_len = |name: &str, v: &[f64]| {
            if v.len() != k {
                return Err(Error::invalid(
                    format!("{path}.{name}"),
                    format!("has length {} but there are {k} covariates", v.len()),
                ));
            }
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("{path}.{name}[{i}]"), "must be finite"));
            }
            Ok(())
        };
        let check_scalar = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{path}.{name}"), "must be finite"))
            }
        };
        match self {
            MeanForm::Linear { intercept, slopes } => {
                check_scalar("intercept", *intercept)?;
                check_len("slopes", slopes)
            }
            MeanForm::Quadratic {
                intercept,
                slopes,
                curvature,
            } => {
                check_scalar("intercept", *intercept)?;
                check_len("slopes", slopes)?;
                check_len("curvature", curvature)
            }
            MeanForm::Interaction {
                intercept,
                slopes,
                coefficient,
            } => {
                if k < 2 {
                    return Err(Error::invalid(path, "interaction needs at least two covariates"));
                }
                check_scalar("intercept", *intercept)?;
                check_scalar("coefficient", *coefficient)?;
                check_len("slopes", slopes)
            }
            MeanForm::ExponentialBounded {
                intercept,
                scale,
                rates,
            } => {
                check_scalar("intercept", *intercept)?;
                check_scalar("scale", *scale)?;
                check_len("rates", rates)
            }
        }
    }
}

/// Per-arm noise scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseScale {
    /// Standard deviation independent of `W`.
    Constant(f64),
    /// Conditional variance `v(W)` from the mean catalogue; negative values
    /// are clamped to zero.
    Variance(MeanForm),
}

impl NoiseScale {
    pub fn sd(&self, w: &[f64]) -> f64 {
        match self {
            NoiseScale::Constant(s) => *s,
            NoiseScale::Variance(f) => sqrt(f.eval(w).max(0.0)),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            NoiseScale::Constant(s) => Some(*s),
            NoiseScale::Variance(_) => None,
        }
    }
}

/// Standardised (mean 0, variance 1) noise distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseShape {
    #[default]
    Gaussian,
    CenteredUniform,
    CenteredTwoPoint,
}

impl NoiseShape {
    pub fn draw(self, stream: &mut Stream) -> f64 {
        match self {
            NoiseShape::Gaussian => stream.standard_normal(),
            NoiseShape::CenteredUniform => sqrt(3.0) * (2.0 * stream.next_f64() - 1.0),
            NoiseShape::CenteredTwoPoint => {
                if stream.next_f64() < 0.5 {
                    -1.0
                } else {
                    1.0
                }
            }
        }
    }
}

/// A value for each arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerArm<T> {
    pub treated: T,
    pub control: T,
}

impl<T> PerArm<T> {
    pub fn get(&self, arm: u8) -> &T {
        if arm == 1 {
            &self.treated
        } else {
            &self.control
        }
    }
}

/// Joint law of `(W, A, Y)` with `A` independent of `W`, `P(A = 1) = pi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpSpec {
    pub pi: f64,
    pub covariate_law: Vec<CoordinateLaw>,
    pub arm_mean: PerArm<MeanForm>,
    pub noise_sd: PerArm<NoiseScale>,
    #[serde(default)]
    pub noise_shape: NoiseShape,
}

impl DgpSpec {
    pub fn k(&self) -> usize {
        self.covariate_law.len()
    }

    /// Checks the spec, reporting the offending field by path.
    pub fn validate(&self) -> Result<()> {
        if !(self.pi > 0.0 && self.pi < 1.0) {
            return Err(Error::invalid("pi", format!("{} is outside (0, 1)", self.pi)));
        }
        let k = self.k();
        for (j, law) in self.covariate_law.iter().enumerate() {
            law.validate(&format!("covariate_law[{j}]"))?;
        }
        self.arm_mean.treated.validate("arm_mean.treated", k)?;
        self.arm_mean.control.validate("arm_mean.control", k)?;
        for (arm, scale) in [("treated", &self.noise_sd.treated), ("control", &self.noise_sd.control)] {
            match scale {
                NoiseScale::Constant(s) => {
                    if !(s.is_finite() && *s >= 0.0) {
                        return Err(Error::invalid(
                            format!("noise_sd.{arm}.constant"),
                            "must be finite and non-negative",
                        ));
                    }
                }
                NoiseScale::Variance(f) => f.validate(&format!("noise_sd.{arm}.variance"), k)?,
            }
        }
        Ok(())
    }

    /// Average treatment effect `E m1(W) - E m0(W)`.
    pub fn delta(&self) -> f64 {
        self.arm_mean.treated.expectation(&self.covariate_law)
            - self.arm_mean.control.expectation(&self.covariate_law)
    }

    /// Linear means and `W`-independent noise: the closed-form limits apply.
    pub fn is_analytic(&self) -> bool {
        self.arm_mean.treated.as_linear().is_some()
            && self.arm_mean.control.as_linear().is_some()
            && self.noise_sd.treated.as_constant().is_some()
            && self.noise_sd.control.as_constant().is_some()
    }

    pub fn covariate_means(&self) -> Vec<f64> {
        self.covariate_law.iter().map(CoordinateLaw::mean).collect()
    }

    pub fn covariate_variances(&self) -> Vec<f64> {
        self.covariate_law.iter().map(CoordinateLaw::variance).collect()
    }

    /// Fills `w` with one covariate draw (one uniform per coordinate).
    pub fn sample_covariates(&self, stream: &mut Stream, w: &mut [f64]) {
        for (x, law) in w.iter_mut().zip(&self.covariate_law) {
            *x = law.sample(stream.next_f64());
        }
    }

    /// Outcome for covariates `w` in `arm`.
    pub fn sample_outcome(&self, w: &[f64], arm: u8, stream: &mut Stream) -> f64 {
        let mean = self.arm_mean.get(arm).eval(w);
        let sd = self.noise_sd.get(arm).sd(w);
        // Always consume the noise draw so streams stay aligned across specs.
        let e = self.noise_shape.draw(stream);
        mean + sd * e
    }

    /// Draws one i.i.d. observation `(W, A, Y)`: covariates into `w`, the
    /// arm by a Bernoulli(pi) draw, then the outcome.
    pub fn sample_observation(
        &self,
        covariates: &mut Stream,
        assignment: &mut Stream,
        noise: &mut Stream,
        w: &mut [f64],
    ) -> (u8, f64) {
        self.sample_covariates(covariates, w);
        let arm = u8::from(assignment.next_f64() < self.pi);
        (arm, self.sample_outcome(w, arm, noise))
    }

    /// The same trial with arm labels exchanged (`pi -> 1 - pi`).
    pub fn swapped(&self) -> DgpSpec {
        DgpSpec {
            pi: 1.0 - self.pi,
            covariate_law: self.covariate_law.clone(),
            arm_mean: PerArm {
                treated: self.arm_mean.control.clone(),
                control: self.arm_mean.treated.clone(),
            },
            noise_sd: PerArm {
                treated: self.noise_sd.control.clone(),
                control: self.noise_sd.treated.clone(),
            },
            noise_shape: self.noise_shape,
        }
    }

    /// Linear spec with one uniform covariate of unit variance centred at
    /// zero, per-arm slopes and constant noise; intercepts are zero so
    /// `delta = 0`.
    pub fn linear_uniform(pi: f64, slopes: (f64, f64), noise_sd: (f64, f64)) -> DgpSpec {
        let half = sqrt(3.0);
        DgpSpec {
            pi,
            covariate_law: alloc::vec![CoordinateLaw::Uniform {
                low: -half,
                high: half
            }],
            arm_mean: PerArm {
                treated: MeanForm::Linear {
                    intercept: 0.0,
                    slopes: alloc::vec![slopes.0],
                },
                control: MeanForm::Linear {
                    intercept: 0.0,
                    slopes: alloc::vec![slopes.1],
                },
            },
            noise_sd: PerArm {
                treated: NoiseScale::Constant(noise_sd.0),
                control: NoiseScale::Constant(noise_sd.1),
            },
            noise_shape: NoiseShape::Gaussian,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn empirical(law: &CoordinateLaw, m: usize) -> (f64, f64, f64) {
        let mut s = Stream::new(9, 0);
        let xs: Vec<f64> = (0..m).map(|_| law.sample(s.next_f64())).collect();
        let mean = xs.iter().sum::<f64>() / m as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1) as f64;
        let mgf = xs.iter().map(|x| exp(0.7 * x)).sum::<f64>() / m as f64;
        (mean, var, mgf)
    }

    #[test]
    fn law_moments_match_sampling() {
        let laws = [
            CoordinateLaw::Uniform { low: -1.0, high: 3.0 },
            CoordinateLaw::TruncatedNormal {
                mean: 0.5,
                sd: 1.2,
                low: -1.0,
                high: 2.5,
            },
            CoordinateLaw::TruncatedNormal {
                mean: 0.0,
                sd: 1.0,
                low: 1.5,
                high: 4.0,
            },
            CoordinateLaw::Discrete {
                values: vec![-1.0, 0.0, 2.0],
                probs: vec![0.2, 0.5, 0.3],
            },
        ];
        let m = 400_000;
        for law in &laws {
            let (mean, var, mgf) = empirical(law, m);
            let sd = sqrt(law.variance());
            assert!(fabs(mean - law.mean()) < 5.0 * sd / sqrt(m as f64), "{law:?}");
            assert!(fabs(var / law.variance() - 1.0) < 0.01, "{law:?}");
            assert!(fabs(mgf / law.mgf(0.7) - 1.0) < 0.01, "{law:?}");
        }
    }

    #[test]
    fn uniform_closed_forms() {
        let law = CoordinateLaw::Uniform { low: 0.0, high: 1.0 };
        assert_eq!(law.mean(), 0.5);
        assert!(fabs(law.variance() - 1.0 / 12.0) < 1e-16);
        assert!(fabs(law.mgf(1.0) - (core::f64::consts::E - 1.0)) < 1e-15);
        assert_eq!(law.mgf(0.0), 1.0);
    }

    #[test]
    fn delta_for_catalogue_forms() {
        let laws = vec![
            CoordinateLaw::Uniform { low: 0.0, high: 1.0 },
            CoordinateLaw::Discrete {
                values: vec![0.0, 1.0],
                probs: vec![0.5, 0.5],
            },
        ];
        let quad = MeanForm::Quadratic {
            intercept: 1.0,
            slopes: vec![2.0, 0.0],
            curvature: vec![3.0, 0.0],
        };
        // 1 + 2 * 1/2 + 3 * 1/3 = 3.
        assert!(fabs(quad.expectation(&laws) - 3.0) < 1e-15);
        let inter = MeanForm::Interaction {
            intercept: 0.0,
            slopes: vec![0.0, 0.0],
            coefficient: 4.0,
        };
        assert!(fabs(inter.expectation(&laws) - 1.0) < 1e-15);
        let expo = MeanForm::ExponentialBounded {
            intercept: 0.0,
            scale: 2.0,
            rates: vec![0.0, 1.0],
        };
        assert!(fabs(expo.expectation(&laws) - (1.0 + core::f64::consts::E)) < 1e-14);
    }

    #[test]
    fn validation_reports_field_paths() {
        let mut spec = DgpSpec::linear_uniform(0.7, (2.0, 0.5), (1.0, 1.0));
        assert!(spec.validate().is_ok());
        spec.pi = 1.0;
        assert!(matches!(spec.validate(), Err(Error::InvalidParameter { field, .. }) if field == "pi"));
        let mut spec = DgpSpec::linear_uniform(0.7, (2.0, 0.5), (1.0, 1.0));
        spec.arm_mean.control = MeanForm::Linear {
            intercept: 0.0,
            slopes: vec![1.0, 2.0],
        };
        assert!(matches!(spec.validate(),
            Err(Error::InvalidParameter { field, .. }) if field == "arm_mean.control.slopes"));
        let mut spec = DgpSpec::linear_uniform(0.7, (2.0, 0.5), (1.0, 1.0));
        spec.covariate_law[0] = CoordinateLaw::Uniform {
            low: 0.0,
            high: f64::INFINITY,
        };
        assert!(matches!(spec.validate(),
            Err(Error::InvalidParameter { field, .. }) if field == "covariate_law[0].high"));
    }

    #[test]
    fn swap_is_an_involution() {
        let spec = DgpSpec::linear_uniform(0.7, (2.0, 0.5), (1.0, 3.0));
        assert_eq!(spec.swapped().swapped(), spec);
        assert!(fabs(spec.swapped().delta() + spec.delta()) < 1e-15);
    }
}
