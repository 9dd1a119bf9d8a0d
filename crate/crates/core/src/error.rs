use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument `{arg}`: {reason}")]
    InvalidArgument { arg: &'static str, reason: String },

    #[error("invalid session: {0}")]
    InvalidSession(String),

    #[error("duplicate feature entry for member `{member}`, slice {slice}, channel `{channel}`")]
    DuplicateEntry {
        member: String,
        slice: usize,
        channel: String,
    },

    #[error("unknown member `{0}`")]
    UnknownMember(String),

    #[error("unknown channel `{0}`")]
    UnknownChannel(String),

    #[error("slice index {index} outside grid of {len} slices")]
    SliceOutOfRange { index: usize, len: usize },

    /// A reliability coefficient whose value is mathematically undefined
    /// for the given data (e.g. zero total variance).
    #[error("undefined statistic: {0}")]
    Undefined(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("missing input files: {}", display_paths(.0))]
    MissingFiles(Vec<std::path::PathBuf>),

    #[error("parse error in {file}: {reason}")]
    Parse { file: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn arg(arg: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            arg,
            reason: reason.into(),
        }
    }
}

fn display_paths(paths: &[std::path::PathBuf]) -> String {
    paths
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(", ")
}
