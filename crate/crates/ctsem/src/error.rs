use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("drift matrix is not stable (max eigenvalue real part {max_real})")]
    Unstable { max_real: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("innovation covariance not positive definite for subject `{subject}` at slice {slice}")]
    NonPsdInnovation { subject: String, slice: usize },

    #[error("singular linear system in {0}")]
    Singular(&'static str),

    #[error("invalid model configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error(transparent)]
    Core(#[from] ctpanel_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Failures of the numerical machinery, as opposed to bad inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Unstable { .. } | Error::NonFinite(_) | Error::NonPsdInnovation { .. } | Error::Singular(_)
        )
    }
}
