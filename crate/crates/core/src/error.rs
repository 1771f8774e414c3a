use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter violates a precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The sampling density is at or below the connectivity threshold
    /// (`p^2 n^3 <= 1`), where the expansion radius is undefined.
    #[error("below connectivity threshold: p^2 n^3 = {value} <= 1 (n = {n}, p = {p})")]
    BelowThreshold { n: usize, p: f64, value: f64 },

    /// A BFS layer needed by a downstream computation is empty.
    #[error("empty layer {layer} in tree rooted at {root}")]
    EmptyLayer { root: usize, layer: usize },

    /// The restricted pair set for a distance computation is empty.
    #[error("empty restricted pair set")]
    EmptyPairSet,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable kind tag, used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::BelowThreshold { .. } => "below_threshold",
            Error::EmptyLayer { .. } => "empty_layer",
            Error::EmptyPairSet => "empty_pair_set",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Config(_) => "config",
        }
    }
}
