use std::path::PathBuf;

use rectenna_core::{
    CalibrationError, LinkError, MatchError, MppError, NetworkError, PmicError, SolverError, UnitError,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("{path}: key `{key}`: {message}")]
    Schema { path: String, key: String, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("plot: {0}")]
    Plot(String),
    #[error("{path}: {message}")]
    Verify { path: String, message: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Mpp(#[from] MppError),
    #[error(transparent)]
    Pmic(#[from] PmicError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Unit(#[from] UnitError),
}

impl CliError {
    /// Short stable identifier for the error summary on stderr.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Parse { .. } => "parse",
            CliError::Schema { .. } => "schema",
            CliError::Io { .. } => "io",
            CliError::Csv(_) => "csv",
            CliError::Plot(_) => "plot",
            CliError::Verify { .. } => "verify",
            CliError::Network(_) | CliError::Match(_) => "network",
            CliError::Solver(_) => "solver",
            CliError::Mpp(_) => "mpp",
            CliError::Pmic(_) => "pmic",
            CliError::Link(_) => "link",
            CliError::Calibration(_) => "calibration",
            CliError::Unit(_) => "unit",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}
