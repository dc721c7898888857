use thiserror::Error;

#[derive(Debug, Error)]
pub enum MmError {
    #[error("dimension mismatch: expected dim={expected}, got dim={got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("K={k} exceeds the number of samples N={n}")]
    TooManyComponents { k: usize, n: usize },

    #[error("degenerate merge: combined weight is zero")]
    DegenerateMerge,

    #[error("L-method needs at least 4 curve points, got {got}; increase K_max")]
    CurveTooShort { got: usize },

    #[error(
        "rejection budget of {attempts} attempts exhausted for target {target}: \
         min pairwise sKLD over attempts ranged {min_seen:.4}..{max_seen:.4} (threshold {threshold})"
    )]
    RejectionExhausted {
        target: String,
        attempts: usize,
        threshold: f64,
        min_seen: f64,
        max_seen: f64,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("schema error at `{path}`: {msg}")]
    Schema { path: String, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{}: {source}", path.display())]
    File {
        path: std::path::PathBuf,
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl MmError {
    /// Stable machine-readable category, used for CLI exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            MmError::DimensionMismatch { .. }
            | MmError::EmptyDataset
            | MmError::InvalidData(_) => "data",
            MmError::InvalidModel(_) | MmError::DegenerateMerge => "model",
            MmError::InvalidConfig(_)
            | MmError::TooManyComponents { .. }
            | MmError::CurveTooShort { .. } => "config",
            MmError::RejectionExhausted { .. } => "generation",
            MmError::Parse { .. } | MmError::Schema { .. } | MmError::Json(_) => "parse",
            MmError::Io(_) | MmError::File { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, MmError>;
