use thiserror::Error;

/// Errors produced while configuring, fitting, or evaluating an approximant.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside its admissible domain (negative spacing, zero levels, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Matrix shapes or spec dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A sampled function value was NaN or infinite.
    #[error("non-finite sample value {value} at ({x}, {y})")]
    NonFiniteSample { x: f64, y: f64, value: f64 },

    /// A factorization failed to converge or produced unusable output.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The dense design matrix would exceed the configured entry cap.
    #[error("design matrix of {rows}x{cols} = {entries} entries exceeds the cap of {cap}")]
    MemoryGuard {
        rows: usize,
        cols: usize,
        entries: usize,
        cap: usize,
    },

    /// One patch of a piecewise fit failed.
    #[error("patch {index}: {source}")]
    Patch {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    /// Process exit code used by the command-line frontend.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_) | Error::Dimension(_) | Error::Config(_) => 1,
            Error::NonFiniteSample { .. } | Error::Numerical(_) | Error::MemoryGuard { .. } => 2,
            Error::Patch { source, .. } => source.exit_code(),
            Error::Io { .. } => 3,
        }
    }
}
