use thiserror::Error;

/// Errors produced by the simulator library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate segment: start and end coincide")]
    DegenerateSegment,

    #[error("invalid box: half extents must be positive, got ({0}, {1}, {2})")]
    InvalidBox(f64, f64, f64),

    #[error("invalid vehicle dimensions: {0}")]
    InvalidDimensions(String),

    #[error("distance {0} m is below the 1 m model anchor")]
    DistanceOutOfDomain(f64),

    #[error("timestep {t} out of range for scenario of duration {duration}")]
    TimestepOutOfRange { t: usize, duration: usize },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("infeasible scenario config: {0}")]
    InfeasibleConfig(String),

    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("insufficient history: need {needed} snapshots, got {got}")]
    InsufficientHistory { needed: usize, got: usize },

    #[error("prediction and ground truth do not match: {0}")]
    PredictionMismatch(String),

    #[error("normalizer is zero: every vehicle is stationary over the horizon")]
    ZeroNormalizer,

    #[error("connectivity is undefined: no connected vehicles were observed")]
    NoConnectedVehicles,

    #[error("json: {0}")]
    Json(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
