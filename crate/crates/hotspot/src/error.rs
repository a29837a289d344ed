use std::io;
use std::path::{Path, PathBuf};

use hotspot_core::Error as CoreError;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const MESH: i32 = 4;
    pub const CONVERGENCE: i32 = 5;
    pub const DEGENERATE: i32 = 6;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    MeshParse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => exit::USAGE,
            CliError::Io { .. } => exit::IO,
            CliError::MeshParse { .. } => exit::MESH,
            CliError::Core(e) => match e {
                CoreError::Topology(_) => exit::MESH,
                CoreError::Parameter(_) | CoreError::DomainMismatch(_) => exit::USAGE,
                e if e.is_convergence_failure() => exit::CONVERGENCE,
                e if e.is_degeneracy() => exit::DEGENERATE,
                _ => exit::FAILURE,
            },
            CliError::Other(_) => exit::FAILURE,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
