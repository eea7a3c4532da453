use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("`{path}` references unknown {kind} `{id}`")]
    DanglingReference {
        path: String,
        kind: &'static str,
        id: String,
    },

    #[error("phase mismatch at `{path}`: {message}")]
    PhaseMismatch { path: String, message: String },

    #[error("network is disconnected: {buses:?} not reachable from `{root}`")]
    Disconnected { root: String, buses: Vec<String> },

    #[error("invalid value at `{path}`: {message}")]
    Invalid { path: String, message: String },

    #[error("missing voltage base for the zone containing bus `{bus}`")]
    MissingVoltageBase { bus: String },

    #[error("unsupported fault `{id}`: {message}")]
    UnsupportedFault { id: String, message: String },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("power flow did not converge in {iterations} iterations (worst residual {residual:.3e} at {node})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        node: String,
    },

    #[error("optimisation failed with status {status:?} after {iterations} iterations")]
    Solver {
        status: crate::nlp::SolveStatus,
        iterations: usize,
    },

    #[error("incompatible results: {0}")]
    Incompatible(String),

    #[error("`{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }
}
