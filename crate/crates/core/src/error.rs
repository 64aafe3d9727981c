use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite coefficient value at ({x}, {y})")]
    NonFiniteCoefficient { x: f64, y: f64 },

    #[error("local coefficients disagree with the global ones at ({x}, {y}) inside the enlarged cutoff support")]
    CoefficientMismatch { x: f64, y: f64 },

    #[error("matrix is singular: zero pivot at column {pivot}")]
    SingularMatrix { pivot: usize },

    #[error("subdomain {index}: {source}")]
    Subdomain {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("coarse problem: {0}")]
    Coarse(#[source] Box<Error>),

    #[error("levels are not nested: {0}")]
    NotNested(String),

    #[error("cover construction failed: {0}")]
    Cover(String),

    #[error("dense oracle size ceiling exceeded: {size} > {ceiling}")]
    SizeCeiling { size: usize, ceiling: usize },

    #[error("{method} did not converge after {iterations} iterations (last estimate {last})")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        last: f64,
    },

    #[error("iteration diverged at step {iteration}")]
    Diverged { iteration: usize, history: Vec<f64> },

    #[error("history too short: need at least {needed} entries, got {got}")]
    HistoryTooShort { needed: usize, got: usize },

    #[error("manufactured solution mismatch: strong residual {residual:e} exceeds {tolerance:e}")]
    ManufacturedMismatch { residual: f64, tolerance: f64 },

    #[error("missing constant: {0}")]
    MissingConstant(&'static str),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn in_subdomain(self, index: usize) -> Self {
        Error::Subdomain {
            index,
            source: Box::new(self),
        }
    }
}
