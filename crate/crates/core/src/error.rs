use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("kernel {0} requires the target score and its jacobian")]
    MissingScore(&'static str),

    #[error("score supplied to a kernel that does not use it")]
    UnexpectedScore,

    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(&'static str),

    #[error("point {point:?} lies outside the target domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("target does not provide an exact sampler")]
    NoSampler,

    #[error("rejection sampling failed after {attempts} attempts")]
    RejectionExhausted { attempts: usize },

    #[error("objective was non-finite at every start point")]
    NoFiniteObjective,

    #[error("grid of {n_grid}^{dim} points exceeds the size guard")]
    GridTooLarge { n_grid: usize, dim: usize },

    #[error("every candidate violated the truncation radius {radius}")]
    AllTruncated { radius: f64 },

    #[error("index {index} out of range for {len} points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("empty point set")]
    Empty,

    #[error("transport problem with {n}x{m} costs exceeds the size guard")]
    TransportTooLarge { n: usize, m: usize },

    #[error("numerical overflow in {context}")]
    Overflow { context: String },

    #[error("zero acceptance over adaptation window starting at step {step}")]
    ZeroAcceptance { step: usize },

    #[error("non-finite update at iteration {iteration}, particle {particle}")]
    NonFiniteUpdate { iteration: usize, particle: usize },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

pub(crate) fn check_finite(xs: &[f64], what: &'static str) -> Result<()> {
    if xs.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
