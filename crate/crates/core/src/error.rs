use thiserror::Error;

/// Errors raised by the pricing engine.
#[derive(Debug, Error)]
pub enum AsrError {
    /// A parameter record violates one of its invariants.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Grid or solver configuration cannot produce a well-posed problem.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// A value outside the domain of a closed-form function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A trading rate outside the participation bounds.
    #[error("participation constraint violated: {0}")]
    Constraint(String),

    /// A step of the backward sweep failed.
    #[error("solver failed at day {day}, node {node}: {source}")]
    Solver {
        day: usize,
        node: usize,
        #[source]
        source: Box<AsrError>,
    },

    /// Inconsistent numbers where an identity should hold.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A state lies beyond the region covered by a policy cube.
    #[error("state outside the policy grid: {0}")]
    OutOfGrid(String),

    /// Malformed cube container, CSV or config file.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, AsrError>;

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(AsrError::Domain(format!("{name} must be finite, got {value}")))
    }
}
