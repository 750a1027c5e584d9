use thiserror::Error;

/// Errors raised across the benchmark.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    /// A covariance that must be factorized could not be, even after the
    /// largest jitter on the ladder.
    #[error("reference covariance is singular (last jitter tried: {max_jitter:e})")]
    SingularReference { max_jitter: f64 },

    #[error("variational marginal is degenerate on the retained measurement rows")]
    DegenerateMarginal,

    #[error("kernel is degenerate: {0}")]
    DegenerateKernel(&'static str),

    #[error("invalid box: dimension {dim} has lo = {lo} >= hi = {hi}")]
    InvalidBox { dim: usize, lo: f64, hi: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("non-finite value at line {line}, column {column}")]
    NonFiniteValue { line: usize, column: usize },

    #[error("split produced an empty {0} set")]
    EmptySplit(&'static str),

    #[error("non-finite gradient at step {step}")]
    NonFiniteGradient { step: usize },

    #[error("input row {0} is not known to the lookup feature map")]
    UnknownInput(usize),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
