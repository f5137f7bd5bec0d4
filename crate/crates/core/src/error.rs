//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid space at /{path}: {reason}")]
    InvalidSpace { path: String, reason: String },
    #[error("level index {level} out of range (depth {depth})")]
    LevelOutOfRange { level: usize, depth: usize },
    #[error("exponent must be positive, got {0}")]
    NonPositiveExponent(f64),
    #[error("invalid exponents: {0}")]
    BadExponents(String),
    #[error("negative weight at leaf {leaf}")]
    NegativeWeight { leaf: usize },
    #[error("objects live on different spaces")]
    SpaceMismatch,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("stopping time value {value} at leaf {leaf} exceeds depth {depth}")]
    StoppingValueOutOfRange { leaf: usize, value: usize, depth: usize },
    #[error("not a stopping time: {{T = {level}}} splits level-{level} atom {atom}")]
    NotStoppingTime { level: usize, atom: usize },
    #[error("invalid stopping sequence: {0}")]
    BadStoppingSequence(String),
    #[error("not a martingale: tower property fails at level {level}, atom {atom} (gap {gap:.3e})")]
    NotMartingale { level: usize, atom: usize, gap: f64 },
    #[error("need {lo} < {hi} with {hi} <= {horizon}")]
    BadIndexPair { lo: usize, hi: usize, horizon: usize },
    #[error("piece index {index} out of range 1..={max}")]
    PieceOutOfRange { index: usize, max: usize },
    #[error("threshold must be positive, got {0}")]
    NonPositiveThreshold(f64),
    #[error("horizon {horizon} too large for exhaustive enumeration (limit {limit})")]
    HorizonTooLarge { horizon: usize, limit: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown check id: {0}")]
    UnknownCheckId(String),
    #[error("search exceeded the bound for {id}: ratio {ratio} > {bound}")]
    SearchBoundViolation { id: String, ratio: f64, bound: f64 },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
