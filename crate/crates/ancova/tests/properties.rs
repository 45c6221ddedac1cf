//! Statistical properties of the simulation engine at moderate sizes.

use ancova::Parallel;
use ancova_core::simulation::{binomial_se, draw_trial};
use ancova_core::{
    ancova_fit, brute_force_limits, model_based_classical, model_based_variance, simulate,
    BruteForceConfig, DgpSpec, SimPlan, SimReport, VarianceKind,
};

fn run(plan: &SimPlan) -> SimReport {
    simulate(plan, &Parallel::new(None).unwrap()).unwrap().0
}

fn s1(n: usize, reps: u64, seed: u64) -> SimPlan {
    SimPlan::new("S1", DgpSpec::linear_uniform(0.7, (2.0, 0.5), (1.0, 1.0)), n, reps, seed)
}

#[test]
fn model_based_mean_approaches_its_limit_as_n_grows() {
    let mut previous: Option<(f64, f64)> = None;
    for (i, n) in [250, 1000, 4000].into_iter().enumerate() {
        let report = run(&s1(n, 10_000, 300 + i as u64));
        let s = report.summary(VarianceKind::ModelBasedPaper).unwrap();
        let gap = (s.mean_n_var_hat - s.plim_n_var_hat).abs();
        let se = s.mean_n_var_hat_se;
        if let Some((prev_gap, prev_se)) = previous {
            assert!(gap <= prev_gap + 3.0 * (se * se + prev_se * prev_se).sqrt(), "n = {n}: {gap} after {prev_gap}");
        }
        previous = Some((gap, se));
    }
}

#[test]
fn half_allocation_makes_both_estimators_valid() {
    let plan = SimPlan::new("S0", DgpSpec::linear_uniform(0.5, (2.0, 0.5), (1.0, 1.0)), 500, 10_000, 41);
    let report = run(&plan);
    let se = binomial_se(0.05, plan.reps);
    let model = report.summary(VarianceKind::ModelBasedPaper).unwrap();
    let sandwich = report.summary(VarianceKind::SandwichIfDf).unwrap();
    for s in [model, sandwich] {
        assert!((s.coverage.unwrap() - 0.95).abs() <= 3.0 * se, "{:?}", s.estimator);
    }
    let (a, b) = (model.rejection_rate.unwrap(), sandwich.rejection_rate.unwrap());
    let combined = (model.rejection_se.unwrap().powi(2) + sandwich.rejection_se.unwrap().powi(2)).sqrt();
    assert!((a - b).abs() < 3.0 * combined);
    for s in &report.estimators {
        assert_eq!(s.rejection_rate.unwrap() + s.coverage.unwrap(), 1.0);
    }
}

#[test]
fn anticonservative_and_conservative_directions_show_at_n_2000() {
    let se = binomial_se(0.05, 10_000);
    let s3 = SimPlan::new("S3", DgpSpec::linear_uniform(0.7, (2.0, 1.0), (1.0, 2.0)), 2000, 10_000, 51);
    let rate = run(&s3).summary(VarianceKind::ModelBasedPaper).unwrap().rejection_rate.unwrap();
    assert!(rate > 0.05 + 3.0 * se, "{rate}");
    let swap = SimPlan::new(
        "S1-swap",
        DgpSpec::linear_uniform(0.3, (2.0, 0.5), (0.1f64.sqrt(), 1.9f64.sqrt())),
        2000,
        10_000,
        52,
    );
    let rate = run(&swap).summary(VarianceKind::ModelBasedPaper).unwrap().rejection_rate.unwrap();
    assert!(rate < 0.05 - 3.0 * se, "{rate}");
}

#[test]
fn zero_noise_plan_is_exact_and_flagged_degenerate() {
    let mut plan = SimPlan::new("zero", DgpSpec::linear_uniform(0.7, (1.5, 1.5), (0.0, 0.0)), 50, 200, 3);
    plan.estimators = VarianceKind::ALL.to_vec();
    plan.estimators.retain(|k| !matches!(k, VarianceKind::Welch | VarianceKind::PooledT));
    let (report, outcomes) = simulate(&plan, &Parallel::new(Some(2)).unwrap()).unwrap();
    for o in &outcomes {
        assert!(o.ancova_estimate.abs() < 1e-12);
        assert!(o.kinds.iter().all(|k| k.variance == 0.0 && k.rejected.is_none()));
    }
    for s in &report.estimators {
        assert_eq!(s.degenerate_inference, plan.reps);
        assert!(s.rejection_rate.is_none() && s.coverage.is_none());
    }
}

#[test]
fn large_trial_recovers_population_coefficients() {
    let plan = s1(100_000, 1, 77);
    let data = draw_trial(&plan, 0, 0).unwrap();
    let fit = ancova_fit(&data).unwrap();
    // Per-observation spread of the coefficient estimates, from an independent
    // oracle sample of the same size.
    let oracle = brute_force_limits(&plan.dgp, &BruteForceConfig { draws: 100_000, seed: 78 }).unwrap();
    let se = oracle.standard_errors.unwrap();
    assert!(fit.beta_a.abs() <= 3.0 * se.beta_a, "{} vs {}", fit.beta_a, se.beta_a);
    assert!((fit.beta_w[0] - 1.55).abs() <= 3.0 * se.beta_w[0], "{} vs {}", fit.beta_w[0], se.beta_w[0]);
    let n = data.n() as f64;
    let paper = model_based_variance(&data, &fit).unwrap().value;
    let classical = model_based_classical(&data, &fit).unwrap().value;
    assert!((paper - classical).abs() / classical < 1e-3);
    assert!((n * paper - 7.0119).abs() / 7.0119 < 0.02);
}
