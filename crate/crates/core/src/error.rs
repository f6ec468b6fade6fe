use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate initialization: all {n} initial weights are zero")]
    DegenerateInitialization { n: usize },

    #[error("degenerate weights at time {time_index}: total weight is zero")]
    DegenerateWeights { time_index: usize },

    #[error("weight {value} at index {index} is negative or not finite")]
    InvalidWeight { index: usize, value: f64 },

    #[error("estimator returned {value} for particle {index}; estimates must be finite and nonnegative")]
    InvalidEstimate { index: usize, value: f64 },

    #[error("exact transition density unavailable; use the pseudo-marginal forward update")]
    MissingExactDensity,

    #[error("rejection backward sampling requires an estimator bound")]
    MissingBound,

    #[error("rejection sampler exhausted {trials} trials without acceptance (bound too loose?)")]
    RejectionExhausted { trials: usize },

    #[error("zero-variance bridge step evaluated off its mean at substep {step}")]
    DegenerateBridge { step: usize },

    #[error("vanishing normalizer at step {step}")]
    VanishingNormalizer { step: usize },

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
