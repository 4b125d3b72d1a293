use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular design: collinear columns {columns:?}")]
    SingularDesign { columns: Vec<String> },

    #[error("within transformation did not converge after {sweeps} sweeps (last max change {last_change:e})")]
    NoConvergence { sweeps: usize, last_change: f64 },

    #[error("clustered standard errors need at least two clusters, found {0}; use heteroskedasticity-robust errors instead")]
    TooFewClusters(usize),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 config, 3 input, 4 stage failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } | Error::Input(_) => 3,
            _ => 4,
        }
    }
}
