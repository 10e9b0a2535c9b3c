use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("coefficient matrix is not symmetric at {point:?} (|a_ij - a_ji| = {gap:e})")]
    CoefficientSymmetry { point: Vec<f64>, gap: f64 },

    #[error("coefficient matrix is not elliptic at {point:?} (smallest eigenvalue {eigenvalue:e})")]
    Ellipticity { point: Vec<f64>, eigenvalue: f64 },

    #[error("invalid time {0}: must be non-negative")]
    InvalidTime(f64),

    #[error("time {t} is not an integer multiple of the step {dt}")]
    StepMismatch { t: f64, dt: f64 },

    #[error("non-finite state produced at step {step}")]
    BlowUp { step: usize },

    #[error("kernel error: {0}")]
    Kernel(String),

    #[error("reaction error: {0}")]
    Reaction(String),

    #[error("condition configuration error: {0}")]
    ConditionConfig(String),

    #[error("fixed-point iteration diverged after {} iterations (min residual {min:e})", history.len())]
    Divergence { history: Vec<f64>, min: f64 },

    #[error("continuation stalled at lambda = {lambda}: {source}")]
    ContinuationStall {
        lambda: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("duality map is undefined at the zero function")]
    SingularDuality,

    #[error("dissipativity condition b > L + |D| violated: b = {b}, L = {lipschitz}, |D| = {measure}")]
    Dissipativity { b: f64, lipschitz: f64, measure: f64 },

    #[error("linear solve failed: {0}")]
    Factorization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
