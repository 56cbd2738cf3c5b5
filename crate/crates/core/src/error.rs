use thiserror::Error;

use crate::sdp::SolveStatus;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite matrix entry at ({0}, {1})")]
    NonFinite(usize, usize),

    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("operator is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("density matrix trace {0} is not 1")]
    BadTrace(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("eigendecomposition failed to converge (residual {0:e})")]
    EigenConvergence(f64),

    #[error("relative entropy is infinite: rho has weight {0:e} outside the support of sigma")]
    InfiniteDivergence(f64),

    #[error("channel is not trace preserving (deviation {0:e})")]
    NotTracePreserving(f64),

    #[error("invalid probability vector: {0}")]
    Probability(String),

    #[error("invalid assemblage: {0}")]
    Assemblage(String),

    #[error("invalid discrimination task: {0}")]
    Task(String),

    #[error("scenario too large: {0}")]
    TooLarge(String),

    #[error("solver returned {status:?}: {detail}")]
    Solver { status: SolveStatus, detail: String },

    #[error("no LHS assemblage reproduces the outcome statistics")]
    EmptyLhsSigma,

    #[error("invariant breach: {0}")]
    Invariant(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
