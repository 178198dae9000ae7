use std::path::{Path, PathBuf};

/// Failure of a command, mapped onto the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{file}: {pointer}: {message}")]
    Schema { file: String, pointer: String, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] gpsteer_core::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use gpsteer_core::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Schema { .. } | CliError::Io { .. } => 3,
            CliError::Core(E::Numeric(_) | E::RankDeficient(_)) => 4,
            CliError::Core(_) => 3,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn schema(file: &Path, pointer: impl Into<String>, message: impl Into<String>) -> Self {
        let pointer = pointer.into();
        CliError::Schema {
            file: file.display().to_string(),
            pointer: if pointer.is_empty() { "/".into() } else { pointer },
            message: message.into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gpsteer_core::Error as E;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(CliError::schema(Path::new("a.json"), "", "bad").exit_code(), 3);
        assert_eq!(CliError::Core(E::InvalidArgument("x".into())).exit_code(), 3);
        assert_eq!(CliError::Core(E::Numeric("x".into())).exit_code(), 4);
        assert_eq!(CliError::schema(Path::new("a.json"), "", "bad").to_string(), "a.json: /: bad");
    }
}
