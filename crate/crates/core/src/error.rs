use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = SmoError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SmoError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch in {context}: expected {expected:?}, got {got:?}")]
    Shape {
        context: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("dark source: no source point above the activity threshold {threshold:e}")]
    DarkSource { threshold: f64 },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("gradient check failed: {0}")]
    GradCheck(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl SmoError {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            SmoError::Numeric(_) | SmoError::DarkSource { .. } => 2,
            SmoError::GradCheck(_) => 3,
            _ => 1,
        }
    }
}

pub(crate) fn check_shape(context: &'static str, expected: (usize, usize), got: (usize, usize)) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(SmoError::Shape { context, expected, got })
    }
}
