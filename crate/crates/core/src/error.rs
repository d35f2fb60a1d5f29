use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("io error: {0}")]
    Stream(#[from] std::io::Error),

    #[error("empty vocabulary")]
    EmptyVocabulary,

    #[error("conllu line {line}: {msg}")]
    Conllu { line: usize, msg: String },

    #[error("{file} line {line}: {msg}")]
    Format {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("no observations")]
    NoObservations,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("index {index} out of range for length {len}")]
    OutOfRange { index: usize, len: usize },

    #[error("non-finite value in {what} at iteration {iteration}")]
    Diverged {
        what: &'static str,
        iteration: usize,
    },

    #[error("empty intersection: dataset has {objects} objects and {verbs} verbs, vocabularies have {nouns} nouns and {vocab_verbs} verbs")]
    EmptyIntersection {
        objects: usize,
        verbs: usize,
        nouns: usize,
        vocab_verbs: usize,
    },

    #[error("empty truth set")]
    EmptyTruth,

    #[error("degenerate t-test")]
    DegenerateTTest,

    #[error("empty target matrix after alignment")]
    EmptyTargets,

    #[error("every cell of the grid failed")]
    AllCellsFailed,

    #[error("config: {0}")]
    Config(String),

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

    /// Short stable identifier used in machine-readable CLI errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } | Error::Stream(_) => "io",
            Error::EmptyVocabulary => "empty_vocabulary",
            Error::Conllu { .. } => "conllu",
            Error::Format { .. } => "format",
            Error::NoObservations => "no_observations",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::OutOfRange { .. } => "out_of_range",
            Error::Diverged { .. } => "diverged",
            Error::EmptyIntersection { .. } => "empty_intersection",
            Error::EmptyTruth => "empty_truth",
            Error::DegenerateTTest => "degenerate_ttest",
            Error::EmptyTargets => "empty_targets",
            Error::AllCellsFailed => "all_cells_failed",
            Error::Config(_) => "config",
            Error::Json(_) => "json",
        }
    }
}
