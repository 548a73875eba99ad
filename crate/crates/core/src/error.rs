use thiserror::Error;

/// Errors raised across the simulation and estimation pipeline.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("campaign index {index} out of range for {count} campaigns")]
    CampaignOutOfRange { index: usize, count: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error(
        "auction rule contract violated at event {event}, campaign {campaign}: increment {value} ({reason})"
    )]
    ContractViolation {
        event: usize,
        campaign: usize,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid segment plan: {0}")]
    InvalidPlan(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SimError {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            SimError::DimensionMismatch { .. } => "dimension-mismatch",
            SimError::CampaignOutOfRange { .. } => "campaign-out-of-range",
            SimError::InvalidParameter { .. } => "invalid-parameter",
            SimError::Empty(_) => "empty",
            SimError::ContractViolation { .. } => "contract-violation",
            SimError::InvalidPlan(_) => "invalid-plan",
            SimError::Calibration(_) => "calibration",
            SimError::Parse { .. } => "parse",
            SimError::UnknownExperiment(_) => "unknown-experiment",
            SimError::Config(_) => "config",
            SimError::Io(_) => "io",
            SimError::Csv(_) => "csv",
            SimError::Json(_) => "json",
        }
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> SimError {
    SimError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
