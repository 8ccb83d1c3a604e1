use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    /// The origin cluster could not be conditioned to be the largest one in the box.
    #[error("conditioning failed after {attempts} attempt(s): {reason}")]
    ConditioningFailed { attempts: u32, reason: String },

    #[error("construction error: {0}")]
    Construction(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("solver did not converge: {reason} (relative residual {residual:e})")]
    Numerical { reason: String, residual: f64 },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("aggregation stalled at particle {particle} after {steps} steps")]
    AggregationStalled { particle: usize, steps: u64 },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
