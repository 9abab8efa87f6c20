use std::path::PathBuf;

use rsp_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] Error),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{}: {source}", .path.display())]
    Output { path: PathBuf, source: Error },
}

impl CliError {
    /// 2 for bad input, 3 for numerical failure, 1 for anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => core_exit_code(e),
            CliError::Io { .. } | CliError::Output { .. } => 1,
        }
    }
}

fn core_exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter(_)
        | Error::Domain(_)
        | Error::Precondition(_)
        | Error::StepSize { .. }
        | Error::ResourceLimit { .. }
        | Error::MissingDependency(_)
        | Error::DimensionMismatch { .. }
        | Error::EmptyGrid
        | Error::Json(_) => 2,
        Error::NothingToDecimate(_)
        | Error::CrossingBonds { .. }
        | Error::EnclosedUnpaired { .. }
        | Error::Instability { .. }
        | Error::UndefinedFraction(_)
        | Error::Convergence { .. }
        | Error::StiffIntegration { .. }
        | Error::Baseline { .. }
        | Error::FitRange(_) => 3,
        Error::Io(_) => 1,
    }
}
