use thiserror::Error;

/// Errors produced by the cascade library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violated a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Geometry that makes a quantity undefined (e.g. coincident eye centers).
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// A model file whose magic bytes or version are not recognized.
    #[error("unsupported model format: {0}")]
    UnsupportedFormat(String),

    /// A model file that is recognized but structurally broken.
    #[error("corrupt model file: {0}")]
    CorruptModel(String),

    /// Dataset-level failure (no valid samples, unreadable inputs, ...).
    #[error("data error: {0}")]
    Data(String),

    /// Non-finite values appeared where finite numbers are required.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
