use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("inconsistent ambient dimension: expected {expected}, found {found}")]
    InconsistentDimension { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite entry at position {0}")]
    NonFinite(usize),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("family not a Riesz basic sequence at working precision (vector {0})")]
    RankDeficient(usize),

    #[error("lower Riesz bound is zero")]
    ZeroLowerBound,

    #[error("family is not unit-norm: vector {index} has norm {norm}")]
    NotUnitNorm { index: usize, norm: f64 },

    #[error("index {index} out of range for size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("instance too large for exhaustive oracle (n = {n}, limit {limit})")]
    InstanceTooLarge { n: usize, limit: usize },

    #[error("pave the zero-diagonal part (diagonal entry {index} has modulus {modulus:e})")]
    NonzeroDiagonal { index: usize, modulus: f64 },

    #[error("partition is not Step-1 certified (margin {0:e})")]
    NotStepOneCertified(f64),

    #[error("Step 3 margin insufficient: |K(m,m)|^2 = {achieved} below {required} at position {position}")]
    StepFourFailure {
        position: usize,
        achieved: f64,
        required: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("condition target {target} unreachable after {attempts} attempts")]
    UnreachableCondition { target: f64, attempts: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("malformed input: {0}")]
    Malformed(String),
}
