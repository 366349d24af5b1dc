//! Error type shared across the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A query point lies outside the closed unit square.
    #[error("point ({0}, {1}) is outside the unit square")]
    OutOfDomain(f64, f64),

    /// A triangle with (numerically) non-positive area was encountered.
    #[error("degenerate element: {0}")]
    DegenerateElement(String),

    /// An iterative solver did not reach its tolerance.
    #[error("solver failure: {0}")]
    SolverFailure(String),

    /// A numeric breakdown (non-SPD pivot, dimension overflow, ...).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Malformed configuration or command line; maps to exit code 2.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Exit code the command line front end maps this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::InvalidArgument(_) => 2,
            _ => 1,
        }
    }
}
