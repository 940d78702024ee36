use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} must be a finite probability in {range}, got {value}")]
    InvalidProbability {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("signal index {index} is out of range for a vocabulary of {len} signals")]
    UnknownSignal { index: usize, len: usize },

    #[error("self-edge ({0}, {0}) is not part of the model")]
    SelfEdge(usize),

    #[error("edge ({a}, {b}) does not connect a room signal to a room or object signal")]
    InvalidEdge { a: usize, b: usize },

    #[error("edge ({a}, {b}) has no samples and smoothing is zero")]
    NoSamples { a: usize, b: usize },

    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),

    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("invalid house: {0}")]
    InvalidHouse(String),

    #[error("goal signal {goal} is unreachable from room {start}")]
    Unreachable { start: usize, goal: usize },

    #[error("malformed trace: {0}")]
    MalformedTrace(String),

    #[error("candidate grid is empty")]
    EmptyGrid,

    #[error("protocol unsatisfiable: {0}")]
    Unsatisfiable(String),

    #[error("unsupported model version {0}")]
    UnsupportedVersion(u32),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
