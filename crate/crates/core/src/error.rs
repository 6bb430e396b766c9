use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A queue whose load is not strictly below its drone count by the
    /// stability margin.
    #[error("facility {facility} is unstable: load {load:.6} with {drones} drones")]
    Stability { facility: usize, load: f64, drones: u32 },

    #[error("infeasible instance: {0}")]
    InfeasibleInstance(String),

    #[error("no feasible solution: {0}")]
    Infeasible(String),

    #[error("instance exceeds the enumeration bound: {0}")]
    SizeExceeded(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("mismatched inputs: {0}")]
    Mismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
