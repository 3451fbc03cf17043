use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("no stories")]
    NoStories,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("goal verb `{0}` does not occur in the training corpus")]
    GoalAbsent(String),

    #[error("no verb precedes goal `{0}` in any story; every reward would be undefined")]
    NoEligibleVerbs(String),

    #[error("requested {requested} clusters but only {distinct} distinct reward values exist; try k <= {distinct}")]
    TooFewValues { requested: usize, distinct: usize },

    #[error("token `{0}` is not in the model vocabulary")]
    OutOfVocabulary(String),

    #[error("verb mask shares no token with the verb vocabulary")]
    EmptyMask,

    #[error("clustered fine-tuning requires a cluster index")]
    MissingClusterIndex,

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("checkpoint version {found} is not supported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// Process exit code: 2 for bad input, 3 for goal/cluster problems, 4 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::Io { .. }
            | Error::NoStories
            | Error::InvalidArgument(_)
            | Error::OutOfVocabulary(_)
            | Error::Checkpoint(_)
            | Error::CheckpointVersion { .. }
            | Error::Json(_) => 2,
            Error::GoalAbsent(_)
            | Error::NoEligibleVerbs(_)
            | Error::TooFewValues { .. }
            | Error::EmptyMask
            | Error::MissingClusterIndex => 3,
        }
    }
}
