use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("i/o error: {0}")]
    Stream(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("lexicon: {0}")]
    Lexicon(String),

    #[error("keyword list {name}: {reason}")]
    Keywords { name: String, reason: String },

    #[error("empty corpus: {0}")]
    EmptyCorpus(String),

    #[error("geojson: {0}")]
    GeoJson(String),

    #[error("acs: {0}")]
    Acs(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{file}: expected schema_version {expected} stage '{stage}', found {found}")]
    SchemaMismatch {
        file: String,
        stage: String,
        expected: u32,
        found: String,
    },

    /// A fatal error tagged with the pipeline stage that raised it.
    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
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

    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }
}
