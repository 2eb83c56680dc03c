use thiserror::Error;

/// Errors raised by shape-space computations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShapeError {
    #[error("degenerate configuration: centered norm {norm:e} is below 1e-12")]
    DegenerateConfiguration { norm: f64 },

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("point lies on the cut locus (inner product {inner:.17})")]
    CutLocus { inner: f64 },

    #[error("vertical projection is not unique on a singular stratum")]
    SingularStratum,

    #[error("mean is undefined: Euclidean average has norm {norm:e}")]
    UndefinedMean { norm: f64 },

    #[error("no convergence after {iterations} iterations (last update {last_update:e})")]
    NoConvergence { iterations: usize, last_update: f64 },

    #[error("projection leaves the target stratum (eigenvalue {value:e} at index {index})")]
    NotInDomain { index: usize, value: f64 },

    #[error("rank mismatch: expected {expected}, found {found}")]
    RankMismatch { expected: usize, found: usize },

    #[error("degenerate covariance: no retained principal components")]
    DegenerateCovariance,

    #[error("means coincide: pairwise distance {distance:e} below threshold")]
    MeansCoincide { distance: f64 },

    #[error("empty sample")]
    EmptySample,

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("regularity violated: {0}")]
    RegularityViolation(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("configuration {index} is {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: String,
        found: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, ShapeError>;
