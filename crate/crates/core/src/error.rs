use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the model pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid cell radius: d_min = {d_min} m must be positive and below d_max = {d_max} m")]
    InvalidRadius { d_max: f64, d_min: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    /// Zero forcing needs strictly more antennas than users.
    #[error("zero-forcing violation: {antennas} antennas cannot serve {users} users")]
    ZfViolation { antennas: usize, users: usize },

    #[error("pilot overhead overflow: {pilots} pilots do not fit in a coherence block of {block} symbols")]
    OverheadOverflow { pilots: usize, block: f64 },

    /// Mean per-antenna output is above what the amplifier can deliver with its PAPR headroom.
    #[error(
        "headroom exceeded: mean output {mean_w} W above the {limit_w} W limit of the amplifier"
    )]
    HeadroomExceeded { mean_w: f64, limit_w: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("user scan too short: best K = {best_k} needs {window} decreasing steps but the scan stops at {k_scan_max}")]
    ScanTooShort {
        best_k: usize,
        window: usize,
        k_scan_max: usize,
    },

    #[error("no convergence after {iterations} iterations: {what}")]
    NoConvergence { iterations: usize, what: String },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Configuration and input-file problems, as opposed to numerical failures.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::Validation(_) | Error::InvalidRadius { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
