use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("state has zero mass")]
    ZeroState,
    #[error("unknown init strategy `{0}`")]
    UnknownStrategy(String),
    #[error("no sign change of P on [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },
    #[error("endpoint construction failed: {0}")]
    Endpoint(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Configuration problems map to exit code 2, everything else to 3.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Params(_) | Error::Grid(_) | Error::UnknownStrategy(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
