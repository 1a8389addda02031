use std::fmt;
use std::path::PathBuf;

use crate::network::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed network file {}: {source}", path.display())]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("malformed flow file {}: {message}", path.display())]
    FlowFile { path: PathBuf, message: String },

    #[error("network is invalid: {}", Violations(.0))]
    Validation(Vec<Violation>),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("modeling error: {0}")]
    Modeling(String),

    #[error("stale partition: built for signature {expected:016x}, flows have {found:016x}")]
    StalePartition { expected: u64, found: u64 },

    #[error("scenario {index}: {source}")]
    Scenario {
        index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Tags an error with the scenario it came from, once.
    pub fn in_scenario(self, index: u64) -> Self {
        match self {
            e @ Error::Scenario { .. } => e,
            e => Error::Scenario {
                index,
                source: Box::new(e),
            },
        }
    }

    /// Process exit code: 1 for input or validation problems, 2 for
    /// numerical and modeling failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::FlowFile { .. }
            | Error::Validation(_)
            | Error::InvalidParameter(_)
            | Error::Csv(_) => 1,
            Error::Infeasible(_)
            | Error::Numerical(_)
            | Error::Modeling(_)
            | Error::StalePartition { .. } => 2,
            Error::Scenario { source, .. } => source.exit_code(),
        }
    }
}

struct Violations<'a>(&'a [Violation]);

impl fmt::Display for Violations<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} violation(s)", self.0.len())?;
        for v in self.0 {
            write!(f, "; {v}")?;
        }
        Ok(())
    }
}
