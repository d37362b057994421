//! Error types shared across the pipeline.

use thiserror::Error;

/// Everything that can go wrong while loading data, talking to a backend,
/// or assembling a run.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: malformed record: {reason}")]
    MalformedRecord {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),

    #[error("unknown relation {0:?}")]
    UnknownRelation(String),

    #[error("unknown entity type {0:?}")]
    UnknownEntityType(String),

    #[error("prediction for unknown sample id {0:?}")]
    OrphanPrediction(String),

    #[error("probability {value} out of range [0, 1]")]
    BadProbability { value: f64 },

    #[error("relation {0:?} has no definition")]
    MissingDefinition(String),

    #[error("relation {0:?} declared twice")]
    DuplicateRelation(String),

    #[error("fixture spec lists no relations")]
    SpecEmpty,

    #[error("cannot build an index over zero samples")]
    EmptyInput,

    #[error("no candidate set for sample {0:?}")]
    MissingCandidates(String),

    #[error("relation {0:?} is not defined in the schema")]
    UndefinedRelation(String),

    #[error("no gold annotations for sample {0:?}")]
    MissingGold(String),

    #[error("no scripted answer for sample {0:?} and no default")]
    UnscriptedSample(String),

    #[error("api key environment variable {0} is not set")]
    AuthMissing(String),

    #[error("rate limited by backend after {attempts} attempts")]
    RateLimited { attempts: u32 },

    #[error("transport failure: {0}")]
    Transport(String),

    #[error("backend returned no usable completion: {0}")]
    BadResponse(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code the CLI maps this error to: backend trouble is 2,
    /// everything else (config/data) is 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Transport(_)
            | Error::AuthMissing(_)
            | Error::RateLimited { .. }
            | Error::BadResponse(_)
            | Error::UnscriptedSample(_) => 2,
            _ => 1,
        }
    }
}
