use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Too few samples, levels or matrix rows.
    #[error("size error: {0}")]
    Size(String),
    /// Input carries the wrong statistics tag.
    #[error("kind error: {0}")]
    Kind(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("data error: {0}")]
    Data(String),
    /// Iterative method failed; `achieved` is the best tolerance or bracket width reached.
    #[error("numerical convergence failure: {message} (achieved {achieved:e})")]
    Numerical { message: String, achieved: f64 },
    #[error("window error: {0}")]
    Window(String),
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("undefined estimate: {0}")]
    UndefinedEstimate(String),
    #[error("{path}:{line}: parse error: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}:{line}: ordering violation: {message}")]
    Ordering { path: PathBuf, line: usize, message: String },
    #[error("{path}:{line}: magnitude violation: {message}")]
    Magnitude { path: PathBuf, line: usize, message: String },
    #[error("{path}: non-uniform frequency grid: {message}")]
    Grid { path: PathBuf, message: String },
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("unknown subcommand `{0}`")]
    UnknownSubcommand(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn size(msg: impl Into<String>) -> Self {
        Error::Size(msg.into())
    }

    /// Process exit code used by the `levelstat` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical { .. } => 3,
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}
