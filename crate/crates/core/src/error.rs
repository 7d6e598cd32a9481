use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Inputs that violate a precondition (empty scene, non-finite data, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Out-of-range parameter values (sigma <= 0, L out of range, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Tensor/array shape mismatch; names both shapes.
    #[error("shape mismatch in {op}: lhs {lhs:?} vs rhs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    /// Sampling region contains no candidate points.
    #[error("empty region: {0}")]
    EmptyRegion(String),

    /// 6-D rotation input with zero or parallel column vectors.
    #[error("degenerate rotation input: {0}")]
    DegenerateRotation(String),

    /// Sequence too short for the requested finite differences.
    #[error("sequence too short: {0}")]
    TooShort(String),

    /// Scene unusable for voxelization (all points coincident).
    #[error("invalid scene: {0}")]
    InvalidScene(String),

    /// Training requested on an empty dataset.
    #[error("empty dataset")]
    EmptyDataset,

    /// Malformed file contents, with location context.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    pub fn shape(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::Shape {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
