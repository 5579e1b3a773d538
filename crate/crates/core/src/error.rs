use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("bad factorization: party dims {party_dims:?} do not multiply to {dim}")]
    BadFactorization { party_dims: Vec<usize>, dim: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("hermiticity violated: max |M - M^dagger| = {deviation:e}")]
    HermiticityViolated { deviation: f64 },

    #[error("positivity violated: eigenvalue {eigenvalue:e}")]
    PositivityViolated { eigenvalue: f64 },

    #[error("trace violated: |tr - 1| = {deviation:e}")]
    TraceViolated { deviation: f64 },

    #[error("state not of X form (largest non-X Pauli expectation {max_deviation:e})")]
    NotXForm { max_deviation: f64 },

    #[error("{what} out of range: {value}")]
    OutOfRange { what: &'static str, value: String },

    #[error("invalid party index {index} for {parties} parties")]
    InvalidParty { index: usize, parties: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("integration diverged at t = {t}: {reason}")]
    IntegrationDiverged { t: f64, reason: String },

    #[error("measurement on decohered party: parties {parties:?}")]
    Theorem1Violation { parties: Vec<usize> },

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
