use thiserror::Error;

/// Errors raised across the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed graph, bad index or inconsistent sizes between inputs.
    #[error("structural error: {0}")]
    Structure(String),

    /// Tensor or matrix shapes that do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A parameter outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// The eigensolver could not produce the requested pairs.
    #[error("eigensolver failure: {0}")]
    Eigen(String),

    /// Augmentation optimization aborted at the given iteration.
    #[error("augmentation failed at iteration {iteration}: {source}")]
    Augment {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    /// Training produced a non-finite loss.
    #[error("non-finite loss {loss} at epoch {epoch}, pgd step {step}")]
    NonFinite { epoch: usize, step: usize, loss: f64 },

    /// Evaluation protocol could not be applied (e.g. single-class split).
    #[error("protocol error: {0}")]
    Protocol(String),

    /// Text or binary input that does not parse.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Configuration key or value problems.
    #[error("config error in `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
