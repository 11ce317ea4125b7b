use thiserror::Error;

#[derive(Debug, Error)]
pub enum SlamError {
    #[error("scan contains no valid returns")]
    EmptyScan,
    #[error("scan has {valid} valid bins, need at least {required}")]
    DegenerateScan { valid: usize, required: usize },
    #[error("map has no occupied cells")]
    NoOccupiedCells,
    #[error("point set is empty")]
    EmptyPointSet,
    #[error("pose ({x:.3}, {y:.3}) lies outside the grid")]
    PoseOutsideGrid { x: f64, y: f64 },
    #[error("covariance is not symmetric positive semi-definite: {0}")]
    NotPsd(&'static str),
    #[error("innovation covariance is singular")]
    SingularInnovation,
    #[error("timestamp {got} is not after previous timestamp {previous}")]
    OutOfOrder { previous: f64, got: f64 },
    #[error("pipeline is not initialized")]
    Uninitialized,
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("resolution mismatch: {0} vs {1}")]
    ResolutionMismatch(f64, f64),
    #[error("reference map has no occupied cells")]
    EmptyReference,
    #[error("no trajectory pairs within {tolerance} s ({unpaired} estimates unpaired)")]
    NoPairs { tolerance: f64, unpaired: usize },
    #[error("need at least {required} pose pairs, got {got}")]
    TooFewPairs { required: usize, got: usize },
    #[error("log is empty")]
    EmptyLog,
    #[error("parse error in {source_name} at line {line}: {message}")]
    Parse {
        source_name: String,
        line: u64,
        message: String,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl SlamError {
    pub fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        SlamError::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    /// Parse and configuration problems, as opposed to failures while running.
    pub fn is_parse(&self) -> bool {
        matches!(
            self,
            SlamError::Parse { .. } | SlamError::InvalidParameter { .. } | SlamError::EmptyLog
        )
    }
}

pub type Result<T> = std::result::Result<T, SlamError>;
