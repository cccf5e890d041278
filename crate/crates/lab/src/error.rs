use thiserror::Error;

/// Failures of the experiment runner, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("property failure: {0}")]
    Property(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime assertion: {0}")]
    Assertion(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Property(_) => 1,
            LabError::Config(_) | LabError::Io { .. } => 2,
            LabError::Assertion(_) => 3,
        }
    }
}

impl From<movecost_core::Error> for LabError {
    fn from(e: movecost_core::Error) -> Self {
        LabError::Assertion(e.to_string())
    }
}
