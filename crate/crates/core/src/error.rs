use std::fmt;

use crate::model::TrajId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("trajectory is empty")]
    EmptyTrajectory,

    #[error("input is empty")]
    EmptyInput,

    #[error("non-finite {what}: {value}")]
    NonFinite { what: &'static str, value: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("timestamp regression for {traj_id}: {got} after {last}")]
    TimestampRegression { traj_id: TrajId, last: f64, got: f64 },

    #[error("unknown trajectory {0}")]
    UnknownTrajectory(TrajId),

    #[error("no temporal overlap: {a} spans {a_span}, {b} spans {b_span}")]
    DisjointTime {
        a: TrajId,
        a_span: Span,
        b: TrajId,
        b_span: Span,
    },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("corrupt store: {0}")]
    Corrupt(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Closed time interval, used in diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Span {
    pub start: f64,
    pub end: f64,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.start, self.end)
    }
}

pub(crate) fn check_finite(what: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { what, value })
    }
}
