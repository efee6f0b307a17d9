use alloc::string::String;

/// Errors raised by operators, factorizations and solvers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("{what} is not positive definite ({detail})")]
    NotPositiveDefinite { what: &'static str, detail: String },

    #[error("operator is not Hermitian: entry ({row}, {col}) differs from its mirror")]
    NotHermitian { row: usize, col: usize },

    /// A non-positive pivot in an (incomplete) Cholesky factorization.
    #[error("factorization breakdown at pivot {index} (value {pivot:e}); increase the diagonal shift")]
    FactorBreakdown { index: usize, pivot: f64 },

    /// The small Gram matrix of a trial basis could not be factorized.
    #[error("ill-conditioned Gram matrix (pivot {index})")]
    Conditioning { index: usize },

    #[error("degenerate trial subspace: {0}")]
    DegenerateSubspace(&'static str),

    #[error("numerical breakdown: {0}")]
    Breakdown(String),

    #[error("clustered eigenvalues make the estimate undefined (lambda_j == lambda_j+1)")]
    ClusterDegenerate,

    #[error("shift sigma = {sigma} must lie below lambda_1 = {lambda1}")]
    InvalidShift { sigma: f64, lambda1: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = core::result::Result<T, Error>;
