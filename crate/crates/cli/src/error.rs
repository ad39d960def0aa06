//! Command-line error type and the stable exit-status contract:
//! 0 optimal/feasible, 2 infeasible, 3 numerical failure, 64 usage or
//! parse error.

use hybrid_observer::Error as LibError;

/// Anything a command can fail with, carrying its exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Missing or contradictory command-line arguments.
    #[error("usage error: {0}")]
    Usage(String),

    /// A file could not be read or written.
    #[error("i/o error on {path}: {reason}")]
    Io {
        /// Offending path.
        path: String,
        /// Underlying reason.
        reason: String,
    },

    /// A config or gains file failed to parse; the reason names the field
    /// and location.
    #[error("parse error in {path}: {reason}")]
    Parse {
        /// Offending file.
        path: String,
        /// Parser message with field and location.
        reason: String,
    },

    /// The parsed configuration is semantically invalid.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The requested optimization or certificate search is infeasible.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Solver breakdown, non-finite states, or failed re-verification.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    /// The process exit status for this error.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) | Self::Io { .. } | Self::Parse { .. } | Self::Config(_) => 64,
            Self::Infeasible(_) => 2,
            Self::Numerical(_) => 3,
        }
    }

    /// Maps a library error onto the exit-status contract: numerical
    /// breakdowns keep their class, everything else traces back to bad
    /// inputs.
    pub fn from_lib(e: LibError) -> Self {
        match e {
            LibError::NumericalFailure { .. } | LibError::NonFiniteState { .. } => {
                Self::Numerical(e.to_string())
            }
            other => Self::Config(other.to_string()),
        }
    }

    /// Wraps a read failure on `path`.
    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), reason: e.to_string() }
    }
}
