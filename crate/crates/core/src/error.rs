use thiserror::Error;

pub type Result<T> = std::result::Result<T, PoseError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoseError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("degenerate segment: endpoints coincide at ({x}, {y})")]
    DegenerateSegment { x: f64, y: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("ground-truth pose has no visible joints")]
    NoVisibleJoints,
}
