use std::path::PathBuf;

use thiserror::Error;

use crate::scenario::LinkClass;
use crate::sco::ScoTrace;
use crate::snrmodel::SnrParams;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("invalid obstacle: {0}")]
    InvalidObstacle(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate channel: effective channel is identically zero")]
    DegenerateChannel,

    #[error("parse error at line {line}, field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("unsupported file version {found} (expected {expected})")]
    UnsupportedVersion { found: String, expected: u32 },

    #[error("fit for class {class} did not converge after {iterations} iterations")]
    FitFailure {
        class: LinkClass,
        iterations: usize,
        best: SnrParams,
    },

    #[error("endpoint {0} violates the obstacle safety margin")]
    InfeasibleEndpoint(&'static str),

    #[error("no layer-respecting path from start to goal in the time-expanded graph")]
    GraphInfeasible,

    #[error("conic assembly error: {0}")]
    Assembly(String),

    #[error("subproblem failed at iteration {iteration}: {reason}")]
    Subproblem {
        iteration: usize,
        reason: String,
        trace: Box<ScoTrace>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn parse(line: usize, field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
