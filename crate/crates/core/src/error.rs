use thiserror::Error;

/// Errors produced by data loading, model evaluation and training.
#[derive(Debug, Error)]
pub enum TskError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("numeric error ({context}): {msg}")]
    Numeric { context: String, msg: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl TskError {
    pub(crate) fn shape(expected: impl Into<String>, found: impl Into<String>) -> Self {
        TskError::Shape {
            expected: expected.into(),
            found: found.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        TskError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Prefixes the context of a numeric error, leaving other kinds untouched.
    pub fn with_numeric_context(self, outer: &str) -> Self {
        match self {
            TskError::Numeric { context, msg } => TskError::Numeric {
                context: format!("{outer}, {context}"),
                msg,
            },
            other => other,
        }
    }

    /// True for errors caused by bad input or configuration rather than numerics.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, TskError::Numeric { .. })
    }
}

pub type Result<T> = std::result::Result<T, TskError>;
