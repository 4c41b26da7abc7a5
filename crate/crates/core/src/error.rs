use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{agents} agents exceed track capacity of {capacity} ({lanes} lanes x {slots_per_lane} spawn slots of {slot_length} m)")]
    Capacity {
        agents: usize,
        capacity: usize,
        lanes: usize,
        slots_per_lane: usize,
        slot_length: f64,
    },

    #[error("expected {expected} actions, got {got}")]
    ActionCount { expected: usize, got: usize },

    #[error("episode is done; call reset before stepping")]
    EpisodeDone,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("forward cache does not match the parameters it is used with")]
    StaleCache,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("rollout buffer is missing bootstrap values")]
    MissingBootstrap,

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("missing checkpoint at {0}")]
    MissingCheckpoint(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("config parse: {0}")]
    TomlDe(#[from] toml::de::Error),

    #[error("config serialize: {0}")]
    TomlSer(#[from] toml::ser::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
