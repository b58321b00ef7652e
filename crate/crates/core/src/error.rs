use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate weight: {0}")]
    DegenerateWeight(String),

    #[error("unstable time step: {0}")]
    Stability(String),

    #[error("diffusion tensor for {variant} is not positive semi-definite (eigenvalues {eigenvalues:?})")]
    IndefiniteDiffusion { variant: String, eigenvalues: [f64; 2] },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("could not parse {path}: {message}")]
    Parse { path: String, message: String },
}

impl Error {
    /// Whether the failure is a numerical stability problem rather than bad input.
    pub fn is_stability(&self) -> bool {
        matches!(self, Error::Stability(_) | Error::IndefiniteDiffusion { .. })
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}
