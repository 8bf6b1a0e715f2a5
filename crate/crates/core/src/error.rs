//! Crate-wide error type.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("image has zero area")]
    EmptyImage,

    #[error("descriptor dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("cosine similarity undefined for a zero vector")]
    ZeroVector,

    #[error("score table parse error at line {line}: {message}")]
    ScoreTableParse { line: usize, message: String },

    #[error("score {value} at line {line} outside [0, 1]")]
    ScoreOutOfRange { line: usize, value: f64 },

    #[error("no score recorded for example pair ({a}, {b})")]
    MissingPair { a: String, b: String },

    #[error("example {example_id} has no patch")]
    MissingPatch { example_id: String },

    #[error("example {example_id} has no descriptor")]
    MissingDescriptor { example_id: String },

    #[error("matcher failed on example pair ({a}, {b}): {source}")]
    MatcherFailure {
        a: String,
        b: String,
        #[source]
        source: Box<Error>,
    },

    #[error("matrix order mismatch: {left} vs {right}")]
    OrderMismatch { left: usize, right: usize },

    #[error("invalid dissimilarity matrix: {0}")]
    InvalidMatrix(String),

    #[error("calibration requires at least one same-person sample")]
    NoPositiveSamples,

    #[error("label universes differ: {0}")]
    LabelUniverseMismatch(String),

    #[error("contingency table is empty")]
    EmptyTable,

    #[error("metric requires at least two items")]
    FewerThanTwoItems,

    #[error("could not place {requested} centroids at margin {margin} in {dim} dimensions within the retry budget")]
    InfeasibleGeometry {
        requested: usize,
        margin: f64,
        dim: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dataset failed validation: {0}")]
    InvalidDataset(String),

    #[error("{path}: parse error at line {line}: {message}")]
    FileParse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("pipeline stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Attach the offending example pair to a matcher error.
    pub fn for_pair(self, a: &str, b: &str) -> Error {
        Error::MatcherFailure {
            a: a.to_string(),
            b: b.to_string(),
            source: Box::new(self),
        }
    }

    /// Attach a pipeline stage name.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
