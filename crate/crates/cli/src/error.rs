use std::path::Path;

use thiserror::Error;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] seedrank_core::Error),

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("{failed} trial(s) failed; see the manifest")]
    TrialsFailed { failed: usize, code: i32 },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => core_exit_code(e),
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io { .. } => EXIT_IO,
            CliError::TrialsFailed { code, .. } => *code,
        }
    }
}

pub fn core_exit_code(e: &seedrank_core::Error) -> i32 {
    use seedrank_core::Error as E;
    match e {
        E::InvalidParameter(_) | E::DimensionMismatch { .. } | E::Refused(_) | E::Parse(_) | E::Json(_) => EXIT_USAGE,
        E::DegenerateMoments(_) | E::DegenerateParameters(_) | E::NearSingularEstimator { .. } | E::NumericFailure { .. } => {
            EXIT_NUMERIC
        }
        E::Io(_) => EXIT_IO,
    }
}
