use std::path::PathBuf;
use std::time::Duration;

use foodrec_core::api::ErrorBody;
use thiserror::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_LOCAL: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_TIMEOUT: u8 = 3;
pub const EXIT_NETWORK: u8 = 4;
pub const EXIT_SERVER: u8 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("{}: not a readable image: {reason}", path.display())]
    BadImage { path: PathBuf, reason: String },
    #[error("bad metadata: {field} ({flag}): {reason}")]
    BadMetadata {
        field: String,
        flag: &'static str,
        reason: String,
    },
    #[error("{0}")]
    Usage(String),
    #[error("occasion {occasion} was not analyzed within {}s", waited.as_secs())]
    Timeout { occasion: String, waited: Duration },
    #[error("network error: {0}")]
    Network(String),
    #[error("server error {}: {} ({})", .0.status, .0.code, .0.message)]
    Api(ErrorBody),
    #[error("unexpected reply from server: {0}")]
    Protocol(String),
    #[error("{0}")]
    Local(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::FileNotFound(_)
            | CliError::BadImage { .. }
            | CliError::BadMetadata { .. }
            | CliError::Usage(_) => EXIT_VALIDATION,
            CliError::Timeout { .. } => EXIT_TIMEOUT,
            CliError::Network(_) => EXIT_NETWORK,
            CliError::Api(body) => match body.code.as_str() {
                "VALIDATION_FAILED" | "PAYLOAD_TOO_LARGE" => EXIT_VALIDATION,
                _ => EXIT_SERVER,
            },
            CliError::Protocol(_) => EXIT_SERVER,
            CliError::Local(_) => EXIT_LOCAL,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Local(e.to_string())
    }
}
