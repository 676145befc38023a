use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// A file was read but its contents are malformed.
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error(transparent)]
    Core(#[from] tring_core::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, msg: impl Into<String>) -> Self {
        CliError::Format {
            path: path.to_path_buf(),
            msg: msg.into(),
        }
    }

    /// Process exit code: 2 validation, 3 I/O, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Io { .. } | CliError::Format { .. } => 3,
            CliError::Core(
                tring_core::Error::NonFinite(_) | tring_core::Error::DegenerateSubproblem(_),
            ) => 4,
            CliError::Core(_) => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Validation("x".into()).exit_code(), 2);
        let io = CliError::io(Path::new("a"), std::io::ErrorKind::NotFound.into());
        assert_eq!(io.exit_code(), 3);
        assert_eq!(CliError::format(Path::new("a"), "bad").exit_code(), 3);
        assert_eq!(CliError::from(tring_core::Error::NonFinite("nan".into())).exit_code(), 4);
        assert_eq!(CliError::from(tring_core::Error::InvalidShape("s".into())).exit_code(), 2);
    }
}
