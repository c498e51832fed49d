use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate triangle (area {area:e} m^2)")]
    DegenerateTriangle { area: f64 },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("trace record {record}: {msg}")]
    Trace { record: usize, msg: String },

    #[error("link outage: channel matrix is zero")]
    Outage,

    #[error("{0}")]
    Metric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
