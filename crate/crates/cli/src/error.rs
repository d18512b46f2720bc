use std::path::Path;

use thiserror::Error;
use tsk_core::TskError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] TskError),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("config: {0}")]
    Config(String),

    /// A check that ran to completion but did not meet its tolerance.
    #[error("{0}")]
    CheckFailed(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    /// 1 for bad input or configuration, 2 for numeric or internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_user_error() => 1,
            CliError::Core(_) | CliError::CheckFailed(_) | CliError::Json(_) => 2,
            CliError::Io { .. } | CliError::Config(_) => 1,
        }
    }

    /// The message collapsed onto one line.
    pub fn one_line(&self) -> String {
        self.to_string().split_whitespace().collect::<Vec<_>>().join(" ")
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let user = CliError::from(TskError::Config("bad".into()));
        assert_eq!(user.exit_code(), 1);
        let numeric = CliError::from(TskError::Numeric { context: "epoch 3".into(), msg: "nan".into() });
        assert_eq!(numeric.exit_code(), 2);
        assert_eq!(CliError::Config("x".into()).exit_code(), 1);
        assert_eq!(CliError::CheckFailed("x".into()).exit_code(), 2);
    }

    #[test]
    fn messages_fit_on_one_line() {
        let e = CliError::Config("expected a table\n  at line 3\n".into());
        assert_eq!(e.one_line(), "config: expected a table at line 3");
    }
}
