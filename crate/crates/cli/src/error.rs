use std::path::PathBuf;

use latflow_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse { .. } => 2,
            CliError::Validation(_) => 3,
            CliError::Core(e) => match e {
                CoreError::BlowUp { .. } | CoreError::StepSizeUnderflow { .. } => 4,
                CoreError::EmptyRegion
                | CoreError::DuplicateSite(_)
                | CoreError::UnknownSite(_)
                | CoreError::NonPositive { .. }
                | CoreError::MissingConstant(..)
                | CoreError::NoInteraction(..)
                | CoreError::PairOutsideRegion(..)
                | CoreError::SupportOutsideRegion(_)
                | CoreError::SameSite(_)
                | CoreError::DimensionMismatch { .. }
                | CoreError::UnderResolvedMollifier { .. }
                | CoreError::NotNested(_)
                | CoreError::InfiniteRange(..)
                | CoreError::NotSchwartz(_)
                | CoreError::NonAnalyticPotential(_) => 3,
                _ => 1,
            },
            CliError::Io { .. } | CliError::Other(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
