use std::path::PathBuf;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CHECK_FAILED: i32 = 1;
    pub const IO: i32 = 2;
    pub const BBOX: i32 = 3;
    pub const SHAPE: i32 = 4;
    pub const USAGE: i32 = 5;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("{0}")]
    BBox(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{0}")]
    Usage(String),
    #[error("{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize },
    #[error(transparent)]
    Core(tanhpolar::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn decode(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Self::Decode {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io { .. } | Self::Decode { .. } => exit::IO,
            Self::BBox(_) => exit::BBOX,
            Self::Shape(_) => exit::SHAPE,
            Self::Usage(_) => exit::USAGE,
            Self::ChecksFailed { .. } => exit::CHECK_FAILED,
            Self::Core(e) => match e {
                tanhpolar::Error::InvalidBBox { .. } => exit::BBOX,
                tanhpolar::Error::ShapeMismatch(_) | tanhpolar::Error::InvalidSize(_) => exit::SHAPE,
                _ => exit::USAGE,
            },
        }
    }
}

impl From<tanhpolar::Error> for CliError {
    fn from(e: tanhpolar::Error) -> Self {
        match e {
            tanhpolar::Error::InvalidBBox { .. } => Self::BBox(e.to_string()),
            e => Self::Core(e),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
