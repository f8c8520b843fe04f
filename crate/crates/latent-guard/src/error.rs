use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] latent_guard_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad IDX magic {found:#010x}, expected {expected:#010x}")]
    BadMagic { path: PathBuf, found: u32, expected: u32 },
    #[error("{path}: truncated file, need {needed} bytes, have {actual}")]
    Truncated {
        path: PathBuf,
        needed: usize,
        actual: usize,
    },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("bundle {path}: {message}")]
    Bundle { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{failed} of {total} sweep configurations failed")]
    PartialSweep { failed: usize, total: usize },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn bundle(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Bundle {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Stable machine-readable code printed as the error line prefix.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Core(latent_guard_core::Error::MissingCalibration) => "E_CALIBRATION",
            Error::Core(_) => "E_COMPUTE",
            Error::Io { .. } => "E_IO",
            Error::BadMagic { .. } | Error::Truncated { .. } | Error::CountMismatch { .. } => "E_DATA",
            Error::Format { .. } | Error::Json(_) | Error::Csv(_) => "E_FORMAT",
            Error::Bundle { .. } => "E_BUNDLE",
            Error::Usage(_) => "E_USAGE",
            Error::PartialSweep { .. } => "E_SWEEP",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
