use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, IglError>;

#[derive(Debug, Error)]
pub enum IglError {
    /// A model object (kernel, policy, reward table) violates its structural invariants.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The reward structure does not satisfy the heterogeneous/homogeneous identifiability split.
    #[error("identifiability violation: {0}")]
    Identifiability(String),

    /// Posterior conditioned on a zero-probability feedback event.
    #[error("undefined posterior: {0}")]
    UndefinedPosterior(String),

    #[error("numerical failure: {message} (last residual {residual:e})")]
    Numerical { message: String, residual: f64 },

    #[error("inconsistent observation: {0}")]
    Inconsistent(String),

    #[error("tuple collection for state {state} exceeded its cap of {cap} episodes ({collected} of {target} records)")]
    CollectionCap {
        state: usize,
        cap: u64,
        collected: usize,
        target: usize,
    },

    #[error("{phase} phase failed: {source}")]
    Phase {
        phase: &'static str,
        #[source]
        source: Box<IglError>,
    },

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl IglError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IglError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_phase(self, phase: &'static str) -> Self {
        match self {
            already @ IglError::Phase { .. } => already,
            other => IglError::Phase {
                phase,
                source: Box::new(other),
            },
        }
    }

    /// The innermost error, looking through phase wrappers.
    pub fn root(&self) -> &IglError {
        match self {
            IglError::Phase { source, .. } => source.root(),
            other => other,
        }
    }
}
