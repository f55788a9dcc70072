use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("dimension mismatch: expected {expected} axes, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("level {level} outside the value range [{min}, {max}]")]
    LevelOutOfRange { level: f64, min: f64, max: f64 },

    #[error("interval [{a}, {b}] is outside the table span [{lo}, {hi}]")]
    IntervalOutsideSpan { a: f64, b: f64, lo: f64, hi: f64 },

    #[error("level {0} is not a quadrature knot of the table")]
    NotAKnot(f64),

    #[error("no minimizer: reduced resistance is {0}")]
    NoMinimizer(f64),

    #[error("pushforward weight is {0}; the decomposition A = w * rho is undefined")]
    UndefinedDecomposition(f64),

    #[error("truncated normalization constant vanishes")]
    ZeroNormalization,

    #[error("sampled map is not strictly increasing at index {0}")]
    NotIncreasing(usize),

    #[error("envelope ordering violated at sample {0}")]
    EnvelopeOrder(usize),

    #[error("too few usable rows in the fit window: {0} (need at least {1})")]
    TooFewRows(usize, usize),

    #[error("empty region")]
    EmptyRegion,

    #[error("constraint sets are invalid: {0}")]
    InvalidConstraints(String),

    #[error("levels are not admissible: {0}")]
    NotAdmissible(String),

    #[error("comparison violated: full capacity {full} exceeds reduced capacity {reduced} + {tol}")]
    ComparisonViolation { full: f64, reduced: f64, tol: f64 },

    #[error("fields do not agree on the constrained nodes (node {0})")]
    ConstraintMismatch(usize),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
