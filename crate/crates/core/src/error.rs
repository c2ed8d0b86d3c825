use std::path::PathBuf;

use crate::circuit::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("assignment of length {len} does not cover boolean variable {var}")]
    Scope { var: usize, len: usize },

    #[error("invalid circuit: {}", format_violations(.0))]
    InvalidCircuit(Vec<Violation>),

    #[error("malformed circuit arena: {0}")]
    Arena(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{0}")]
    Data(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("example set of size {got} does not index a database of {expected} examples")]
    Subset { expected: usize, got: usize },

    #[error("target set is empty; the f1 objective is undefined")]
    EmptyTarget,

    #[error("no probability threshold satisfies the elbow conditions ({} candidates scanned)", .profile.len())]
    NoElbow { profile: Vec<(f64, usize)> },

    #[error("CNF distribution exceeded the budget of {budget} clauses; prune the circuit further first")]
    ClauseBudget { budget: usize },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// Wraps an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Name of the innermost stage, if any.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }

    /// Innermost error below any stage wrappers.
    pub fn root_cause(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root_cause(),
            e => e,
        }
    }
}

fn format_violations(v: &[Violation]) -> String {
    let parts: Vec<String> = v.iter().map(|v| v.to_string()).collect();
    parts.join("; ")
}
