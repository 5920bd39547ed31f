use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CopError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CopError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parameter {name} = {value} outside [{min}, {max}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("user {ue_id} is in outage and has no SINR")]
    NoSinr { ue_id: u32 },

    #[error("degenerate KPI: {0}")]
    DegenerateKpi(String),

    #[error("capacity undefined: {0}")]
    Capacity(String),

    #[error("grid has {cardinality} points, limit is {limit}")]
    GridTooLarge { cardinality: u64, limit: u64 },

    #[error("model fit failed: {0}")]
    Fit(String),

    #[error("fitness evaluation failed for genes {genes:?}: {reason}")]
    Fitness { genes: [f64; 6], reason: String },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<CopError>,
    },
}

impl CopError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CopError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CopError::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
