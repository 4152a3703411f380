//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Unknown identifier, bad axis name, malformed configuration string.
    #[error("registry error: {0}")]
    Registry(String),

    /// A caller violated an operation precondition.
    #[error("contract error: {0}")]
    Contract(String),

    /// A capability limit was exceeded (e.g. Sobol dimension table size).
    #[error("capability error: {0}")]
    Capability(String),

    /// Experiment spec file could not be parsed or is inconsistent.
    #[error("spec error: {0}")]
    Spec(String),

    /// A pipeline stage is missing inputs produced by an earlier stage.
    #[error("missing input: {0}")]
    MissingInput(String),

    /// Numerical failure (NaN fitness, corrupt optimizer state, unscoreable data).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 spec, 3 missing input, 4 numerical, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Spec(_) | Error::Registry(_) => 2,
            Error::MissingInput(_) => 3,
            Error::Numerical(_) => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
