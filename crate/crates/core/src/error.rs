use thiserror::Error;

/// Errors produced anywhere in the bound pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: max |H - H^dagger| = {asymmetry:.3e} (tolerance {tolerance:.1e})")]
    NotHermitian { asymmetry: f64, tolerance: f64 },

    #[error("matrix is not unitary: |U^dagger U - I| = {deviation:.3e} (tolerance {tolerance:.1e})")]
    NotUnitary { deviation: f64, tolerance: f64 },

    #[error("matrix is not in SU(d): |det - 1| = {deviation:.3e}")]
    NotSpecialUnitary { deviation: f64 },

    #[error("expected a square matrix, found {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix logarithm is branch-ambiguous: eigenphase {phase:.6} is within the safety margin of -pi/pi")]
    BranchAmbiguity { phase: f64 },

    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("base-point condition f(U0) = I violated: |f(U0) - I|_F = {distance:.3e}")]
    BasePoint { distance: f64 },

    #[error("operator is zero")]
    ZeroOperator,

    #[error("unknown task `{0}`")]
    UnknownTask(String),

    #[error("operator basis does not span su({dim}): {reason}")]
    IncompleteBasis { dim: usize, reason: String },

    #[error("problem too large for the dense solver: {variables} variables (limit {limit})")]
    ProblemTooLarge { variables: usize, limit: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
