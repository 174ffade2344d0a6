use thiserror::Error;

/// Every failure mode surfaced by the library and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {rows}x{cols} needs {expected} entries, got {got}")]
    Shape {
        rows: usize,
        cols: usize,
        expected: usize,
        got: usize,
    },
    #[error("non-finite entry at position {index}")]
    NonFinite { index: usize },
    #[error("length {len} is not a power of two")]
    NonPowerOfTwoLength { len: usize },
    #[error("SRHT needs n to be a power of two, got n = {n}")]
    NonPowerOfTwoN { n: usize },
    #[error("singular value iteration did not converge after {sweeps} sweeps")]
    ConvergenceFailure { sweeps: usize },
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("column sparsity s = {s} exceeds sketch rows m = {m}")]
    SparsityExceedsRows { s: usize, m: usize },
    #[error("numerical rank {rank} is below the required {required}")]
    RankDeficient { rank: usize, required: usize },
    #[error("materializing {entries} entries exceeds the cap of {cap}")]
    TooLarge { entries: usize, cap: usize },
    #[error("direction vector has zero norm")]
    ZeroDirection,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("basis is not orthonormal (max |B^T B - I| = {deviation:e})")]
    NotOrthonormal { deviation: f64 },
    #[error("||T||_2 = {t_norm} exceeds 1/2; use more sketch rows")]
    TNormTooLarge { t_norm: f64 },
    #[error("empty input")]
    EmptyInput,
    #[error("invalid config field `{field}`: {message}")]
    ConfigInvalid { field: String, message: String },
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        Error::ConfigInvalid {
            field: field.to_string(),
            message: message.into(),
        }
    }
}
