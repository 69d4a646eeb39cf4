use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quantile inversion did not converge (p={p}, shape={shape})")]
    Convergence { p: f64, shape: f64 },

    #[error("exposure units differ: {0} vs {1}")]
    UnitMismatch(&'static str, &'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing required column \"{column}\"")]
    MissingColumn { column: String },

    #[error("row {row}: {message}")]
    MalformedRow { row: usize, message: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("duplicate key: {0}")]
    DuplicateKey(String),

    #[error("no benchmark for {0}")]
    MissingBenchmark(String),

    #[error("report id {0} already present")]
    DuplicateId(String),

    #[error("classification of {report_id}: {message}")]
    Classification { report_id: String, message: String },

    #[error("unknown report format \"{0}\"")]
    UnknownFormat(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
