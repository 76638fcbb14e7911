use std::path::PathBuf;

/// Errors raised anywhere in the localization pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid array configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("grid subdivision level {level} exceeds the maximum of {max}")]
    GridTooLarge { level: u32, max: u32 },

    #[error(
        "steering matrix of {rows} x {cols} needs {required} bytes, above the cap of {cap} bytes"
    )]
    MemoryCap {
        rows: usize,
        cols: usize,
        required: u64,
        cap: u64,
    },

    #[error("singular value decomposition failed: {0}")]
    Decomposition(String),

    #[error("malformed model file: {0}")]
    ModelFormat(String),

    #[error("checksum mismatch in {0}")]
    Checksum(String),

    #[error("unsupported model file version {found} (this build reads version {expected})")]
    Version { found: u32, expected: u32 },

    #[error("total energy weight {0} is not positive")]
    NonPositiveWeight(f64),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),

    #[error("config syntax: {0}")]
    ConfigSyntax(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
