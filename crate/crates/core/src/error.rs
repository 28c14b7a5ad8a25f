//! Error type shared by all modules, with the exit-code convention used by
//! the command-line front end.

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("station graph is not connected")]
    NotConnected,

    #[error("edge set is not symmetric: ({from}, {to}) has no reverse edge")]
    AsymmetricEdges { from: String, to: String },

    #[error("routing fractions at station {station} sum to {sum}, expected 1")]
    NonStochasticRouting { station: String, sum: f64 },

    #[error("invalid edge: {0}")]
    InvalidEdge(String),

    #[error("step size must be positive, got {0}")]
    NegativeDt(f64),

    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("barrier argument is not strictly positive: {0}")]
    BoundaryState(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("line search left the barrier domain")]
    LeftDomain,

    #[error("sensitivity system matrix is singular")]
    SingularJm,

    #[error("invalid box: lower bound {lower} exceeds upper bound {upper} at component {index}")]
    BadBounds {
        index: usize,
        lower: f64,
        upper: f64,
    },

    #[error("balance set is empty: {0}")]
    Infeasible(String),

    #[error("upper regulation band is undefined: ln argument {argument} is not positive")]
    DeltaMaxUndefined { argument: f64 },

    #[error("trace and oracle samples are misaligned: {0}")]
    Misaligned(String),

    #[error("missing field {0}")]
    MissingField(String),

    #[error("parse error at {path}: {message}")]
    ParseError { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for model-assumption violations,
    /// 3 for numerical failures, 1 for I/O and input-format problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotConnected
            | Error::AsymmetricEdges { .. }
            | Error::NonStochasticRouting { .. }
            | Error::AssumptionViolated(_) => 2,
            Error::NegativeDt(_)
            | Error::DimensionMismatch { .. }
            | Error::BoundaryState(_)
            | Error::NoConvergence { .. }
            | Error::LeftDomain
            | Error::SingularJm
            | Error::BadBounds { .. }
            | Error::Infeasible(_)
            | Error::DeltaMaxUndefined { .. }
            | Error::Misaligned(_) => 3,
            Error::InvalidEdge(_)
            | Error::MissingField(_)
            | Error::ParseError { .. }
            | Error::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
