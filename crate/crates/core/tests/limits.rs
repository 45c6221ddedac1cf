//! Limiting variances: frozen closed-form values, algebraic identities and
//! agreement between the closed-form and brute-force routes.

use ancova_core::dgp::{CoordinateLaw, MeanForm, NoiseScale, PerArm};
use ancova_core::{
    analytic_limits, bias_diagnosis, brute_force_limits, limits, population_coefficients,
    theorem1_limit, theorem2_limit, BiasDirection, BruteForceConfig, DgpSpec, LimitRoute,
    VarianceKind,
};
use proptest::prelude::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn anticonservative_reference_values() {
    let dgp = DgpSpec::linear_uniform(0.7, (2.0, 0.5), (1.0, 1.0));
    let lim = analytic_limits(&dgp).unwrap();
    assert!(close(lim.beta_under.beta_w[0], 1.55, 1e-14));
    assert!(close(lim.v1, 1.2025, 1e-14));
    assert!(close(lim.v0, 2.1025, 1e-14));
    assert!(close(lim.thm1_value, 8.726190476190474, 1e-12));
    assert!(close(lim.thm2_value, 7.011904761904761, 1e-12));
    assert_eq!(lim.diagnosis.direction, BiasDirection::Anticonservative);
    assert!(close(lim.diagnosis.predicted_type1, 0.07893022931379734, 1e-9));
    assert_eq!(lim.route, LimitRoute::Analytic);
}

#[test]
fn conservative_swap_reference_values() {
    let s = 0.1f64.sqrt();
    let dgp = DgpSpec::linear_uniform(0.3, (2.0, 0.5), (s, 1.9f64.sqrt()));
    let lim = analytic_limits(&dgp).unwrap();
    assert!(close(lim.beta_under.beta_w[0], 0.95, 1e-14));
    assert!(close(lim.v1, 1.2025, 1e-13));
    assert!(close(lim.v0, 2.1025, 1e-13));
    assert!(close(lim.thm1_value, 1.2025 / 0.3 + 2.1025 / 0.7, 1e-12));
    assert!(close(lim.thm2_value, 1.2025 / 0.7 + 2.1025 / 0.3, 1e-12));
    assert_eq!(lim.diagnosis.direction, BiasDirection::Conservative);
    assert!(close(lim.diagnosis.predicted_type1, 0.028781638982089325, 1e-9));
}

#[test]
fn heteroscedastic_reference_values() {
    let dgp = DgpSpec::linear_uniform(0.7, (2.0, 1.0), (1.0, 2.0));
    let lim = analytic_limits(&dgp).unwrap();
    assert!(close(lim.v1, 1.09, 1e-13));
    assert!(close(lim.v0, 4.49, 1e-13));
    assert!(close(lim.thm1_value, 1.09 / 0.7 + 4.49 / 0.3, 1e-12));
    assert!(close(lim.thm2_value, 1.09 / 0.3 + 4.49 / 0.7, 1e-12));
    assert_eq!(lim.diagnosis.direction, BiasDirection::Anticonservative);
}

#[test]
fn equal_slopes_and_noise_are_exact() {
    let dgp = DgpSpec::linear_uniform(0.7, (1.0, 1.0), (1.0, 1.0));
    let lim = analytic_limits(&dgp).unwrap();
    assert!(close(lim.thm1_value, 4.761904761904762, 1e-12));
    assert_eq!(lim.diagnosis.direction, BiasDirection::Exact);
    assert_eq!(lim.diagnosis.predicted_type1, 1.0 - 0.95);
    assert_eq!(lim.bias_ratio, 1.0);
}

#[test]
fn theorem_helpers_agree_with_full_limits() {
    let dgp = DgpSpec::linear_uniform(0.6, (1.5, -0.5), (0.7, 1.3));
    let lim = analytic_limits(&dgp).unwrap();
    assert_eq!(theorem1_limit(&dgp).unwrap(), lim.thm1_value);
    assert_eq!(theorem2_limit(&dgp).unwrap(), lim.thm2_value);
    let coef = population_coefficients(&dgp).unwrap();
    assert!(close(coef.beta_w[0], 0.6 * 1.5 - 0.4 * 0.5, 1e-14));
    assert!(close(coef.beta_a, dgp.delta(), 1e-14));
}

#[test]
fn limits_for_routes_each_kind() {
    let lim = analytic_limits(&DgpSpec::linear_uniform(0.7, (2.0, 0.5), (1.0, 1.0))).unwrap();
    assert_eq!(lim.limits_for(VarianceKind::ModelBasedPaper), (lim.thm1_value, lim.thm2_value));
    assert_eq!(lim.limits_for(VarianceKind::SandwichIfDf), (lim.thm1_value, lim.thm1_value));
    let u = lim.unadjusted;
    assert_eq!(lim.limits_for(VarianceKind::Welch), (u.thm1_value, u.thm1_value));
    assert_eq!(lim.limits_for(VarianceKind::PooledT), (u.thm1_value, u.thm2_value));
    assert!((lim.predicted_rejection(VarianceKind::SandwichIfDf, 0.95) - 0.05).abs() < 1e-15);
    // Unadjusted arm variances are the full outcome variances.
    assert!(close(u.v1, 4.0 + 1.0, 1e-13));
    assert!(close(u.v0, 0.25 + 1.0, 1e-13));
}

#[test]
fn diagnosis_follows_level() {
    let lim = analytic_limits(&DgpSpec::linear_uniform(0.7, (2.0, 0.5), (1.0, 1.0))).unwrap();
    let d90 = bias_diagnosis(&lim, 0.90);
    let d99 = bias_diagnosis(&lim, 0.99);
    assert!(d90.predicted_type1 > 0.10 && d99.predicted_type1 > 0.01);
    assert!(d90.predicted_type1 > d99.predicted_type1);
    assert_eq!(lim.clone().at_level(0.9).diagnosis, d90);
}

#[test]
fn zero_noise_identical_arms_is_degenerate_but_exact() {
    let dgp = DgpSpec::linear_uniform(0.7, (1.0, 1.0), (0.0, 0.0));
    let lim = analytic_limits(&dgp).unwrap();
    assert_eq!(lim.v1, 0.0);
    assert_eq!(lim.v0, 0.0);
    assert_eq!(lim.diagnosis.direction, BiasDirection::Exact);
    assert_eq!(lim.bias_ratio, 1.0);
}

fn random_linear(
    pi: f64,
    k: usize,
    slopes1: &[f64],
    slopes0: &[f64],
    half_widths: &[f64],
    sd: (f64, f64),
) -> DgpSpec {
    DgpSpec {
        pi,
        covariate_law: half_widths[..k]
            .iter()
            .map(|h| CoordinateLaw::Uniform { low: -h, high: 2.0 * h })
            .collect(),
        arm_mean: PerArm {
            treated: MeanForm::Linear { intercept: 0.5, slopes: slopes1[..k].to_vec() },
            control: MeanForm::Linear { intercept: -0.5, slopes: slopes0[..k].to_vec() },
        },
        noise_sd: PerArm {
            treated: NoiseScale::Constant(sd.0),
            control: NoiseScale::Constant(sd.1),
        },
        noise_shape: Default::default(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn half_allocation_is_always_exact(
        k in 1usize..4,
        b1 in prop::collection::vec(-3.0f64..3.0, 3),
        b0 in prop::collection::vec(-3.0f64..3.0, 3),
        h in prop::collection::vec(0.1f64..3.0, 3),
        s1 in 0.0f64..3.0,
        s0 in 0.0f64..3.0,
    ) {
        let lim = analytic_limits(&random_linear(0.5, k, &b1, &b0, &h, (s1, s0))).unwrap();
        prop_assert!((lim.thm1_value - lim.thm2_value).abs() <= 1e-12 * lim.thm1_value.max(1e-300));
        prop_assert_eq!(lim.diagnosis.direction, BiasDirection::Exact);
    }

    #[test]
    fn equal_arm_variances_are_always_exact(pi in 0.05f64..0.95, b in -3.0f64..3.0, s in 0.1f64..3.0) {
        let lim = analytic_limits(&random_linear(pi, 1, &[b], &[b], &[1.0], (s, s))).unwrap();
        prop_assert!((lim.thm1_value - lim.thm2_value).abs() <= 1e-12 * lim.thm1_value);
    }

    #[test]
    fn swapping_arms_exchanges_the_roles(
        pi in 0.05f64..0.95,
        b1 in prop::collection::vec(-3.0f64..3.0, 2),
        b0 in prop::collection::vec(-3.0f64..3.0, 2),
        s1 in 0.1f64..3.0,
        s0 in 0.1f64..3.0,
    ) {
        let dgp = random_linear(pi, 2, &b1, &b0, &[1.0, 0.5], (s1, s0));
        let (a, b) = (analytic_limits(&dgp).unwrap(), analytic_limits(&dgp.swapped()).unwrap());
        prop_assert!(close(b.v1, a.v0, 1e-12) && close(b.v0, a.v1, 1e-12));
        prop_assert!(close(b.thm1_value, a.thm1_value, 1e-12));
        prop_assert!(close(b.thm2_value, a.thm2_value, 1e-12));
        prop_assert!(close(b.delta, -a.delta, 1e-12));
    }

    #[test]
    fn direction_matches_variance_ordering(
        pi in 0.05f64..0.95,
        s1 in 0.1f64..3.0,
        s0 in 0.1f64..3.0,
    ) {
        prop_assume!((pi - 0.5).abs() > 0.01 && (s1 - s0).abs() > 0.01);
        let lim = analytic_limits(&random_linear(pi, 1, &[1.0], &[1.0], &[1.0], (s1, s0))).unwrap();
        // thm2 - thm1 = (v1 - v0)(2 pi - 1)/(pi (1 - pi)).
        let anti = (s1 * s1 - s0 * s0) * (2.0 * pi - 1.0) < 0.0;
        let expected = if anti { BiasDirection::Anticonservative } else { BiasDirection::Conservative };
        prop_assert_eq!(lim.diagnosis.direction, expected);
        let gap = (s1 * s1 - s0 * s0) * (2.0 * pi - 1.0) / (pi * (1.0 - pi));
        prop_assert!((lim.thm2_value - lim.thm1_value - gap).abs() < 1e-10 * lim.thm1_value);
    }
}

fn within_se(estimate: f64, truth: f64, se: f64, what: &str) {
    assert!(se > 0.0, "{what}: zero standard error");
    assert!(
        (estimate - truth).abs() <= 4.0 * se,
        "{what}: {estimate} vs {truth} (se {se})"
    );
}

#[test]
fn brute_force_matches_closed_form() {
    let config = BruteForceConfig { draws: 400_000, seed: 11 };
    for dgp in [
        DgpSpec::linear_uniform(0.7, (2.0, 0.5), (1.0, 1.0)),
        DgpSpec::linear_uniform(0.3, (2.0, 1.0), (1.0, 2.0)),
        random_linear(0.6, 2, &[1.0, -1.0], &[0.5, 2.0], &[1.0, 2.0], (0.5, 1.5)),
    ] {
        let exact = analytic_limits(&dgp).unwrap();
        let bf = brute_force_limits(&dgp, &config).unwrap();
        assert_eq!(bf.route, LimitRoute::BruteForce);
        let se = bf.standard_errors.clone().unwrap();
        within_se(bf.v1, exact.v1, se.v1, "v1");
        within_se(bf.v0, exact.v0, se.v0, "v0");
        within_se(bf.thm1_value, exact.thm1_value, se.thm1_value, "thm1");
        within_se(bf.thm2_value, exact.thm2_value, se.thm2_value, "thm2");
        within_se(bf.beta_under.beta_a, exact.beta_under.beta_a, se.beta_a, "beta_a");
        for j in 0..dgp.k() {
            within_se(bf.beta_under.beta_w[j], exact.beta_under.beta_w[j], se.beta_w[j], "beta_w");
        }
    }
}

#[test]
fn quadratic_mean_routes_to_brute_force() {
    // W ~ U(-sqrt 3, sqrt 3): E W^3 = 0, so the best linear slope of W^2 is
    // zero and v1 = Var(W^2) + 1 = 9/5 - 1 + 1.
    let mut dgp = DgpSpec::linear_uniform(0.7, (0.0, 0.0), (1.0, 1.0));
    dgp.arm_mean.treated = MeanForm::Quadratic {
        intercept: 0.0,
        slopes: vec![0.0],
        curvature: vec![1.0],
    };
    assert!(!dgp.is_analytic());
    assert!(analytic_limits(&dgp).is_err());
    assert!((dgp.delta() - 1.0).abs() < 1e-12);
    let lim = limits(&dgp, &BruteForceConfig { draws: 400_000, seed: 5 }).unwrap();
    assert_eq!(lim.route, LimitRoute::BruteForce);
    let se = lim.standard_errors.clone().unwrap();
    within_se(lim.v1, 1.8, se.v1, "v1");
    within_se(lim.v0, 1.0, se.v0, "v0");
    within_se(lim.beta_under.beta_w[0], 0.0, se.beta_w[0], "beta_w");
    within_se(lim.thm1_value, 1.8 / 0.7 + 1.0 / 0.3, se.thm1_value, "thm1");
}

#[test]
fn brute_force_is_deterministic_in_seed() {
    let dgp = DgpSpec::linear_uniform(0.7, (2.0, 0.5), (1.0, 1.0));
    let config = BruteForceConfig { draws: 150_000, seed: 3 };
    let a = brute_force_limits(&dgp, &config).unwrap();
    let b = brute_force_limits(&dgp, &config).unwrap();
    assert_eq!(a, b);
    let c = brute_force_limits(&dgp, &BruteForceConfig { seed: 4, ..config }).unwrap();
    assert_ne!(a.v1, c.v1);
}

#[test]
fn analytic_rejects_degenerate_covariate() {
    let mut dgp = DgpSpec::linear_uniform(0.7, (1.0, 1.0), (1.0, 1.0));
    dgp.covariate_law[0] = CoordinateLaw::Discrete { values: vec![2.0], probs: vec![1.0] };
    assert!(analytic_limits(&dgp).is_err());
}
