use std::path::{Path, PathBuf};

use edp_core::Error as CoreError;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Failure of a command, carrying enough location detail to act on.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration or arguments. `location` is `file:line` when known.
    #[error("{location}: {message}")]
    Config { location: String, message: String },
    /// Malformed or inconsistent input data.
    #[error("{location}: {message}")]
    Data { location: String, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: CoreError,
    },
}

impl CliError {
    pub fn config(location: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config {
            location: location.into(),
            message: message.into(),
        }
    }

    pub fn data(location: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Data {
            location: location.into(),
            message: message.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn core(context: impl Into<String>, source: CoreError) -> Self {
        Self::Core {
            context: context.into(),
            source,
        }
    }

    /// Process exit status: 2 configuration, 3 data, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } => 2,
            Self::Data { .. } | Self::Io { .. } => 3,
            Self::Core { source, .. } => core_exit_code(source),
        }
    }

    /// The library error underneath, if any.
    pub fn core_error(&self) -> Option<&CoreError> {
        match self {
            Self::Core { source, .. } => Some(source),
            _ => None,
        }
    }
}

fn core_exit_code(e: &CoreError) -> i32 {
    match e {
        CoreError::ConfigInvalid(_)
        | CoreError::InvalidPriors(_)
        | CoreError::ScheduleOutOfRange(_)
        | CoreError::InvalidK { .. } => 2,
        CoreError::SingularDesign | CoreError::ZeroEvents => 4,
        _ => 3,
    }
}

/// Attaches a context string to library results.
pub trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T>;
}

impl<T> Context<T> for edp_core::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|e| CliError::core(what(), e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(CliError::config("a.txt:3", "bad").exit_code(), 2);
        assert_eq!(CliError::data("obs.csv:9", "bad").exit_code(), 3);
        let io = CliError::io(Path::new("x"), std::io::Error::other("gone"));
        assert_eq!(io.exit_code(), 3);
        assert_eq!(CliError::core("fit", CoreError::ScheduleOutOfRange(3)).exit_code(), 2);
        assert_eq!(CliError::core("fit", CoreError::SingularDesign).exit_code(), 4);
        assert_eq!(CliError::core("fit", CoreError::EmptyTrace).exit_code(), 3);
        assert_eq!(CliError::config("cfg:7", "x").to_string(), "cfg:7: x");
    }
}
