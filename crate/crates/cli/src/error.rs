use std::path::PathBuf;

use sddcp::Termination;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_INFEASIBLE_START: i32 = 4;
pub const EXIT_SOLVER: i32 = 5;
pub const EXIT_CERTIFY: i32 = 6;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] sddcp::Error),

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("malformed {what}: {msg}")]
    Malformed { what: &'static str, msg: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("no optimal iterate was produced (termination: {0:?})")]
    NoIterate(Termination),

    #[error("{0} certificate check(s) failed")]
    CertifyFailed(usize),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        use sddcp::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io { .. } | CliError::Malformed { .. } | CliError::Csv(_) => EXIT_INPUT,
            CliError::NoIterate(Termination::InfeasibleStart) => EXIT_INFEASIBLE_START,
            CliError::NoIterate(_) => EXIT_SOLVER,
            CliError::CertifyFailed(_) => EXIT_CERTIFY,
            CliError::Core(e) => match e {
                E::Parse { .. } | E::Io(_) | E::Json(_) => EXIT_INPUT,
                E::InfeasibleStart => EXIT_INFEASIBLE_START,
                E::Solver(_) | E::NotOptimal(_) | E::CapabilityMissing(_) | E::NotInCone(_) => EXIT_SOLVER,
                _ => EXIT_USAGE,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
