use std::path::PathBuf;

use thiserror::Error;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // corpus construction
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("empty {0} id")]
    EmptyId(&'static str),
    #[error("utterance {utterance:?} replies to unknown utterance {target:?}")]
    DanglingReply { utterance: String, target: String },
    #[error("utterance {utterance:?} replies to {target:?} in a different conversation")]
    CrossConversationReply { utterance: String, target: String },
    #[error("reply cycle in conversation {conversation:?} through {ids:?}")]
    CycleDetected {
        conversation: String,
        ids: Vec<String>,
    },
    #[error("conversation {conversation:?} has multiple roots {roots:?}")]
    MultipleRoots {
        conversation: String,
        roots: Vec<String>,
    },
    #[error("conversation {0:?} has no root utterance")]
    NoRoot(String),
    #[error("conversation {0:?} has no utterances")]
    EmptyConversation(String),
    #[error("unknown speaker {0:?}")]
    UnknownSpeaker(String),
    #[error("unknown conversation {0:?}")]
    UnknownConversation(String),
    #[error("unknown utterance {0:?}")]
    UnknownUtterance(String),
    #[error("corpus fails integrity check: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    IntegrityViolation(Vec<Violation>),

    // persistence
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("{file}:{line}: malformed record: {reason}")]
    MalformedRecord {
        file: String,
        line: u64,
        reason: String,
    },
    #[error("manifest declares {declared} {what} but found {found}")]
    CountMismatch {
        what: &'static str,
        declared: usize,
        found: usize,
    },
    #[error("unsupported format version {0:?}")]
    UnsupportedVersion(String),
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("irreconcilable collision on {kind} {id:?}: field {field} differs")]
    IrreconcilableCollision {
        kind: &'static str,
        id: String,
        field: &'static str,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),

    // transformers
    #[error("{0} must be fitted before use")]
    NotFitted(String),
    #[error("{object} lacks annotation {key:?}")]
    MissingAnnotation { key: String, object: String },
    #[error("selection matched no objects")]
    EmptySelection,
    #[error("class {0} selects no tokens")]
    EmptyClass(u8),
    #[error("vocabulary is empty after filtering")]
    EmptyVocabulary,
    #[error("labels contain a single class")]
    DegenerateLabels,
    #[error("expected dimension {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("conversation {conversation:?} has no boolean label under {key:?}")]
    MissingLabel { conversation: String, key: String },
    #[error("invalid filter expression {expr:?}: {reason}")]
    InvalidFilter { expr: String, reason: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("pipeline stage {stage} ({name}) failed: {source}")]
    Stage {
        stage: usize,
        name: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// Innermost error, looking through pipeline stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}
