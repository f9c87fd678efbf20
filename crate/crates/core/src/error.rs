use thiserror::Error;

/// Errors raised by the estimators, prior constructors and the benchmark.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A prior, hyperparameter or experiment configuration is invalid.
    #[error("configuration error: {0}")]
    Config(String),

    /// The exhaustive oracle was asked for more coordinates than it enumerates.
    #[error("size error: n = {n} exceeds the limit of {max}")]
    Size { n: usize, max: usize },

    /// The data carry no information about the quantity requested.
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("unsupported ball: {0}")]
    UnsupportedBall(String),

    #[error("unknown method descriptor: {0}")]
    UnknownMethod(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Whether the error stems from invalid user input rather than numerics.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::DegenerateData(_))
    }
}
