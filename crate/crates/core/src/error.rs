use std::path::PathBuf;

/// Errors produced anywhere in the reuse pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("embedding backend error: {0}")]
    EmbeddingBackend(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("classifier backend error: {0}")]
    ClassifierBackend(String),

    #[error("invalid slots: {0}")]
    InvalidSlots(String),

    #[error("duplicate entry: {0}")]
    DuplicateEntry(String),

    #[error("invalid vector: {0}")]
    InvalidVector(String),

    #[error("parse error at line {line}, column {column}: expected {expected}")]
    Parse {
        line: usize,
        column: usize,
        expected: String,
    },

    #[error("cyclic plan: {}", .path.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" -> "))]
    CyclicPlan { path: Vec<usize> },

    #[error("unresolved reference: {0}")]
    UnresolvedReference(String),

    #[error("plan has more than one terminal step: {0:?}")]
    AmbiguousTerminal(Vec<usize>),

    #[error("missing parameter: {0}")]
    MissingParameter(String),

    #[error("unknown tool: {0}")]
    UnknownTool(String),

    #[error("step {index} failed: {cause}")]
    StepFailed { index: usize, cause: String },

    #[error("planner backend error: {0}")]
    PlannerBackend(String),

    #[error("incompatible snapshot: {0}")]
    IncompatibleSnapshot(String),

    #[error("corrupt snapshot: {0}")]
    SnapshotCorrupt(String),

    #[error("cache capacity of {0} entries reached")]
    CapacityReached(usize),

    #[error("admission rejected: {0}")]
    AdmissionRejected(String),

    #[error("evaluation input error: {0}")]
    EvaluationInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("corpus error: {0}")]
    Corpus(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of a pluggable backend (embedder, classifier,
    /// planner). The pipeline degrades these to a bypass.
    pub fn is_backend(&self) -> bool {
        matches!(
            self,
            Error::EmbeddingBackend(_) | Error::ClassifierBackend(_) | Error::PlannerBackend(_)
        )
    }
}
