use thiserror::Error;

/// Errors raised by the analysis modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unknown message `{0}`")]
    UnknownMessage(String),

    #[error("unknown variable {0}")]
    UnknownVariable(String),

    #[error("overlapping variable subsets: {0}")]
    Overlap(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid topology: {}", .0.join("; "))]
    InvalidTopology(Vec<String>),

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("bad parameters: {0}")]
    BadParams(String),

    #[error("unknown theorem id `{0}`")]
    UnknownTheorem(String),

    #[error("unknown scheme id `{0}`")]
    UnknownScheme(String),

    #[error("cap exceeded: {what} needs {estimate} but the cap is {cap}")]
    CapExceeded {
        what: String,
        estimate: f64,
        cap: f64,
    },

    #[error("negative input {0} to psi")]
    NegativeInput(f64),

    #[error("singular covariance: {0}")]
    SingularCovariance(String),

    #[error("empty argmax set")]
    EmptyArgmax,

    #[error("shape mismatch: {0}")]
    Shape(String),
}

pub type Result<T> = std::result::Result<T, Error>;
