//! Crate-wide error type and exit-code mapping.

pub type Result<T> = std::result::Result<T, ZfuzzError>;

#[derive(Debug, thiserror::Error)]
pub enum ZfuzzError {
    /// Bad configuration, missing files, unusable inputs. Exit code 1.
    #[error("configuration error: {0}")]
    Config(String),

    /// Generation backend failure after retries. Exit code 2.
    #[error("backend error: {0}")]
    Backend(String),

    /// A stated invariant was violated at runtime. Exit code 3.
    #[error("invariant violation: {0}")]
    Invariant(String),

    /// Prompt template could not be rendered; never emits partial prompts.
    #[error("template error: {0}")]
    Template(String),

    /// Source failed to parse. Carries the offending location.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u32,
        column: u32,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl ZfuzzError {
    /// Process exit code for the CLI contract: 0 success, 1 fatal
    /// configuration, 2 backend failure, 3 internal invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            ZfuzzError::Backend(_) => 2,
            ZfuzzError::Invariant(_) => 3,
            _ => 1,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        ZfuzzError::Config(msg.into())
    }

    pub fn invariant(msg: impl Into<String>) -> Self {
        ZfuzzError::Invariant(msg.into())
    }
}
