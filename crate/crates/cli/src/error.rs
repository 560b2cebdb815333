use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(ptlg::Error),
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
    #[error("check failed: {0}")]
    CheckFailed(String),
    #[error("acceptance failures: {0}")]
    VerifyFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::VerifyFailed(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::CheckFailed(_) => 4,
        }
    }
}

impl From<ptlg::Error> for CliError {
    /// Domain errors come from user-supplied values, so they count as
    /// configuration errors.
    fn from(e: ptlg::Error) -> Self {
        match e {
            ptlg::Error::Domain(msg) => CliError::Config(msg),
            ptlg::Error::Io(io) => CliError::Io(io),
            other => CliError::Numeric(other),
        }
    }
}
