use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("enumeration of {requested} items exceeds the guard of {limit}")]
    GuardExceeded { requested: u128, limit: u128 },
    #[error("conditioning on an event of probability zero")]
    NullEvent,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),
    #[error("grammar generates no terminal string")]
    EmptyLanguage,
    #[error("word is not in the language")]
    NoParse,
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("internal consistency check failed: {0}")]
    Consistency(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code, used by the CLI error payload.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::InvalidModel(_) => "invalid_model",
            Error::GuardExceeded { .. } => "guard_exceeded",
            Error::NullEvent => "null_event",
            Error::Precondition(_) => "precondition",
            Error::Unsupported(_) => "unsupported",
            Error::AlphabetMismatch(_) => "alphabet_mismatch",
            Error::EmptyLanguage => "empty_language",
            Error::NoParse => "no_parse",
            Error::Parse { .. } => "parse",
            Error::Consistency(_) => "consistency",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
