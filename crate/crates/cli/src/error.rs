use std::path::PathBuf;

use thiserror::Error;

/// Everything that stops a command, with its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("invalid `{name}`: {reason}")]
    Field { name: String, reason: String },

    #[error("{0}")]
    Usage(String),

    #[error("solver did not converge: {0}")]
    NotConverged(String),

    #[error("Monte Carlo budget exceeded: {0}")]
    Budget(String),

    #[error("verification failed: {0}")]
    Verify(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Toolkit(#[from] skld::Error),
}

impl CliError {
    pub fn field(name: &str, reason: impl Into<String>) -> Self {
        CliError::Field {
            name: name.to_owned(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 validation, 2 non-convergence, 3 Monte Carlo budget, 4 a failed
    /// verification check, 5 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Field { .. } | CliError::Usage(_) => 1,
            CliError::NotConverged(_) => 2,
            CliError::Budget(_) => 3,
            CliError::Verify(_) => 4,
            CliError::Io { .. } => 5,
            CliError::Toolkit(e) => match e {
                skld::Error::Censored { .. } => 3,
                skld::Error::Diverged { .. }
                | skld::Error::IllConditioned(_)
                | skld::Error::NonFinite(_) => 2,
                _ => 1,
            },
        }
    }
}
