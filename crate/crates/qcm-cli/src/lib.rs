//! Experiment driver around [`qcm_core`]: JSON-configured runs that write
//! reproducible CSV/JSON datasets, plus the error type that maps failures to
//! the process exit codes (0 success, 2 bad configuration, 3 degenerate
//! estimator flags over threshold, 1 anything else).

use std::fmt;

pub mod config;
pub mod experiment;

#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or arguments.
    Config(String),
    /// The fraction of output rows carrying degenerate-estimator flags
    /// exceeded the configured threshold.  The datasets were still written
    /// in full (flagged rows are recorded, never dropped).
    Numerical { flagged: usize, total: usize, threshold: f64 },
    /// Any other runtime failure.
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Failure(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Numerical { flagged, total, threshold } => write!(
                f,
                "numerical-flag failure: {flagged}/{total} rows carry degenerate \
                 estimator flags, exceeding the threshold of {threshold}"
            ),
            CliError::Failure(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<qcm_core::QcmError> for CliError {
    fn from(e: qcm_core::QcmError) -> Self {
        CliError::Failure(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failure(format!("io error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Failure(format!("json error: {e}"))
    }
}
