//! Error type shared by every simulator layer.

use std::fmt;

/// Errors surfaced by the simulator.
///
/// Configuration and workload problems are user errors; protocol and
/// internal errors indicate a simulator bug.
#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("workload error at line {line}: {msg}")]
    Workload { line: usize, msg: String },

    #[error("invalid tier index {index} (geometry has {tiers} tiers)")]
    InvalidTier { index: usize, tiers: usize },

    #[error("protocol error: {command} is illegal while bank {bank} is {phase}")]
    Protocol {
        command: String,
        bank: usize,
        phase: String,
    },

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl SimError {
    pub fn config(msg: impl fmt::Display) -> Self {
        SimError::Config(msg.to_string())
    }

    pub fn internal(msg: impl fmt::Display) -> Self {
        SimError::Internal(msg.to_string())
    }

    pub fn workload(line: usize, msg: impl fmt::Display) -> Self {
        SimError::Workload {
            line,
            msg: msg.to_string(),
        }
    }

    /// Process exit code: 1 for workload/config errors, 2 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Protocol { .. } | SimError::Internal(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
