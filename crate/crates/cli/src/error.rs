use std::fmt;

/// Failure classes, each with its own process exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Domain(weakval::Error),
    NonFinite(String),
    Io(String),
    VerifyFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Domain(_) | CliError::NonFinite(_) => 3,
            CliError::VerifyFailed(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Domain(e) => write!(f, "domain error: {e}"),
            CliError::NonFinite(msg) => write!(f, "domain error: NonFiniteOutput: {msg}"),
            CliError::Io(msg) => write!(f, "io error: {msg}"),
            CliError::VerifyFailed(n) => write!(f, "verification failed: {n} check(s) did not pass"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<weakval::Error> for CliError {
    fn from(e: weakval::Error) -> Self {
        CliError::Domain(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
