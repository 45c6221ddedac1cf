//! Covariate-adjusted (ANCOVA) treatment effect estimation for two-arm
//! randomised trials.
//!
//! The crate is `no_std` and only needs `alloc`. It holds the numerical
//! pieces: the trial data model and design matrix, the OLS fit, the
//! competing variance estimators for the treatment coefficient, the
//! population probability limits those estimators converge to, a
//! counter-based random number generator, and a replication engine that
//! draws trials from a generative description. File formats, the CLI and
//! parallel execution live in the `ancova` companion crate.
//!
//! Notation used throughout: `W` is the covariate vector (length `k`), `A`
//! is the arm indicator (1 = experimental, 0 = control), `Y` the outcome,
//! and `pi` is `P(A = 1)`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod asymptotics;
pub mod data;
pub mod dgp;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod linalg;
pub mod rng;
pub mod simulation;
pub mod special;

pub use asymptotics::{
    analytic_limits, bias_diagnosis, brute_force_limits, limits, population_coefficients,
    theorem1_limit, theorem2_limit, AsymptoticLimits, BiasDirection, BruteForceConfig,
    Diagnosis, LimitRoute, PopulationCoefficients,
};
pub use data::{design_matrix, DesignMatrix, TrialDataset};
pub use dgp::{CoordinateLaw, DgpSpec, MeanForm, NoiseScale, NoiseShape, PerArm};
pub use error::{Error, Result};
pub use estimators::{
    ancova_fit, empirical_influence, model_based_classical, model_based_variance,
    pooled_t_variance, sandwich_variance, unadjusted_estimate, wald_test, welch_variance,
    AncovaFit, PiSource, Reference, SandwichCorrection, VarianceEstimate, VarianceKind,
    WaldResult,
};
pub use rng::{Philox4x32, Stream};
pub use exec::{Executor, Sequential};
pub use simulation::{
    run_simulation, simulate, Assignment, EstimatorSummary, ReplicationOutcome, SimPlan,
    SimReport, Tolerance,
};
