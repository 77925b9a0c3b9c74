/// Common result type for this crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the simulation, training and benchmark pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An operation was called on an object in the wrong state
    /// (e.g. a controller stepped before a model was loaded).
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// Tensor or vector shapes do not line up.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A numerical routine produced non-finite values or failed to solve.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A persisted file has an unsupported version tag.
    #[error("unsupported format version {found}, expected {expected}")]
    VersionMismatch { expected: u32, found: u32 },

    /// A persisted file failed its integrity check.
    #[error("checksum mismatch: {0}")]
    Checksum(String),

    /// A persisted file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn invalid_state(msg: impl Into<String>) -> Self {
        Error::InvalidState(msg.into())
    }

    pub fn shape_mismatch(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
