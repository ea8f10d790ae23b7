use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or unknown configuration key/value.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed or inconsistent input data.
    #[error("data error: {0}")]
    Data(String),

    /// Calibration of effect scales failed.
    #[error("calibration did not converge after {iterations} iterations (s_alpha={scale_alpha}, s_omega={scale_omega})")]
    Calibration {
        iterations: usize,
        scale_alpha: f64,
        scale_omega: f64,
    },

    /// A numerical routine could not proceed.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error class (2 config, 3 data, 4 runtime).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) => 3,
            Error::Calibration { .. } | Error::Numerical(_) | Error::Io { .. } => 4,
        }
    }
}
