// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}:{line}: malformed row: {reason}")]
    MalformedRow {
        path: PathBuf,
        line: u64,
        reason: String,
    },

    #[error("reduce index {reduce_index} out of range [0, {r}) for group {group:?}")]
    ReduceIndexOutOfRange {
        reduce_index: usize,
        r: usize,
        group: Vec<u8>,
    },

    /// Plan or BDM does not describe the data being processed.
    #[error("stale plan: {0}")]
    StalePlan(String),

    /// A coverage or consistency check failed inside a job.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) => 2,
            Error::InvalidDataset(_)
            | Error::MissingColumn { .. }
            | Error::MalformedRow { .. }
            | Error::Io(_)
            | Error::Json(_) => 3,
            Error::ReduceIndexOutOfRange { .. } | Error::StalePlan(_) | Error::Invariant(_) => 4,
        }
    }
}
