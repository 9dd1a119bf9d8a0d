use thiserror::Error;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<ctpanel_core::Error> for CliError {
    fn from(e: ctpanel_core::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ctpanel_ctsem::Error> for CliError {
    fn from(e: ctpanel_ctsem::Error) -> Self {
        use ctpanel_ctsem::Error as E;
        match e {
            e if e.is_numerical() => CliError::Numerical(e.to_string()),
            E::Config(_) | E::Toml(_) => CliError::Usage(e.to_string()),
            E::Core(inner) => inner.into(),
            e => CliError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
