use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("inconsistent dimensions: {0}")]
    Dimension(String),

    #[error("non-finite value in {field} at row {row}")]
    NonFinite { field: String, row: usize },

    #[error("arm indicator not in {{0,1}} at row {row}")]
    ArmValue { row: usize },

    #[error("arm {arm} is empty; both arms must be observed")]
    EmptyArm { arm: u8 },

    #[error("arm {arm} has {count} observations, at least {required} required")]
    ArmTooSmall { arm: u8, count: usize, required: usize },

    #[error("{n} observations are too few for {params} parameters (need at least {required})")]
    TooFewObservations { n: usize, params: usize, required: usize },

    #[error("design matrix is rank deficient: column `{column}` is linearly dependent on earlier columns")]
    RankDeficient { column: String },

    #[error("design matrix is ill-conditioned (condition number {condition:.3e} exceeds {limit:.0e})")]
    IllConditioned { condition: f64, limit: f64 },

    #[error("sample covariance of the covariates is singular")]
    SingularCovariance,

    #[error("degenerate arm indicator: adjusted variance of A is {0} (must be > 0)")]
    DegenerateArm(f64),

    #[error("variance must be positive for a Wald test (got {0})")]
    ZeroVariance(f64),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("too many degenerate replications: {redraws} redraws over {reps} replications")]
    TooManyRedraws { redraws: u64, reps: u64 },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by the numbers rather than by malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. }
                | Error::IllConditioned { .. }
                | Error::SingularCovariance
                | Error::DegenerateArm(_)
                | Error::ZeroVariance(_)
                | Error::TooManyRedraws { .. }
                | Error::TooFewObservations { .. }
        )
    }
}
