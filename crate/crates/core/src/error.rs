use a2a_lp::{LpError, LpStatus};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("graph is not strongly connected: node {to} is unreachable from node {from}")]
    Disconnected { from: usize, to: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("construction failed: {0}")]
    Construction(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("{what}: solver stopped with status {status:?}{detail}")]
    Solve { what: String, status: LpStatus, detail: String },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("schedule error: {0}")]
    Schedule(String),
    #[error("replay failed: {0}")]
    Replay(String),
    #[error("layer assignment failed: {0}")]
    Layers(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
