use mcs_core::container::ContainerError;
use std::path::Path;

/// Failure classes, each with its own process exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Acceptance(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) | Self::Config(_) => 1,
            Self::Data(_) => 2,
            Self::Acceptance(_) => 3,
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::Config(format!("{}: {err}", path.display()))
    }

    pub fn container(path: &Path, err: ContainerError) -> Self {
        match err {
            ContainerError::Io(e) => Self::io(path, e),
            other => Self::Data(format!("{}: {other}", path.display())),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage(String::new()).exit_code(), 1);
        assert_eq!(CliError::Config(String::new()).exit_code(), 1);
        assert_eq!(CliError::Data(String::new()).exit_code(), 2);
        assert_eq!(CliError::Acceptance(String::new()).exit_code(), 3);
        let truncated = CliError::container(Path::new("x"), ContainerError::TruncatedFile("payload".into()));
        assert_eq!(truncated.exit_code(), 2);
    }
}
