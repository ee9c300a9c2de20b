//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Crate-wide error enum. Variant names are stable and surfaced by the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("coupling matrix is asymmetric at ({i},{j})")]
    AsymmetricCoupling { i: usize, j: usize },

    #[error("coupling matrix has a nonzero diagonal entry at index {i}")]
    NonzeroDiagonal { i: usize },

    #[error("non-finite entry at {at}")]
    NonFiniteEntry { at: String },

    #[error("bad subset key {key:?}: {reason}")]
    BadSubsetKey { key: Vec<usize>, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state space too large for exact enumeration: n={n} exceeds cap {cap}")]
    TooLargeForExact { n: usize, cap: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("epsilon must lie in (0, 1], got {0}")]
    BadEpsilon(f64),

    #[error("gamma must lie in (0, 1), got {0}")]
    BadGamma(f64),

    #[error("marginal at index {i} is too close to ±1 for a stable gradient")]
    BoundaryMarginal { i: usize },

    #[error("model violates the Dobrushin condition (eta = {eta})")]
    NotInDobrushinRegime { eta: f64 },

    #[error("model is not ferromagnetic: coupling ({i},{j}) is negative")]
    NotFerromagnetic { i: usize, j: usize },

    #[error("external field is not uniform: h[{i}] differs from h[0]")]
    NonUniformField { i: usize },

    #[error("grid budget exceeded: {0}")]
    GridBudgetExceeded(String),

    #[error("every vertex is isolated; normalized adjacency is undefined")]
    AllIsolated,

    #[error("model is zero: {0}")]
    ZeroModel(String),

    #[error("normalized eigenvalue {value} is outside [-1,1] beyond tolerance")]
    EigenvalueOutOfRange { value: f64 },

    #[error("bad model file: {0}")]
    BadModelFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable short name of the variant, used in CLI error reporting.
    pub fn name(&self) -> &'static str {
        match self {
            Error::AsymmetricCoupling { .. } => "AsymmetricCoupling",
            Error::NonzeroDiagonal { .. } => "NonzeroDiagonal",
            Error::NonFiniteEntry { .. } => "NonFiniteEntry",
            Error::BadSubsetKey { .. } => "BadSubsetKey",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::TooLargeForExact { .. } => "TooLargeForExact",
            Error::InvalidParams(_) => "InvalidParams",
            Error::BadEpsilon(_) => "BadEpsilon",
            Error::BadGamma(_) => "BadGamma",
            Error::BoundaryMarginal { .. } => "BoundaryMarginal",
            Error::NotInDobrushinRegime { .. } => "NotInDobrushinRegime",
            Error::NotFerromagnetic { .. } => "NotFerromagnetic",
            Error::NonUniformField { .. } => "NonUniformField",
            Error::GridBudgetExceeded(_) => "GridBudgetExceeded",
            Error::AllIsolated => "AllIsolated",
            Error::ZeroModel(_) => "ZeroModel",
            Error::EigenvalueOutOfRange { .. } => "EigenvalueOutOfRange",
            Error::BadModelFile(_) => "BadModelFile",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
