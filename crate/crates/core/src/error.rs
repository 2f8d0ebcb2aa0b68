use thiserror::Error;

use crate::model::ValidationReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("category {y} out of range for item {item} (valid 2..={max})")]
    CategoryOutOfRange { item: usize, y: usize, max: usize },

    #[error("invalid model: {0}")]
    Invalid(ValidationReport),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("invalid options: {0}")]
    InvalidOptions(String),

    #[error("unknown initialization strategy `{0}`")]
    UnknownStrategy(String),

    #[error("zero variance in support points of {0}")]
    ZeroVariance(String),

    #[error("Newton update failed in block {0}")]
    SingularUpdate(String),

    #[error("enumeration too large: {0}")]
    InstanceTooLarge(String),

    #[error("invalid simulation spec: {0}")]
    InvalidSpec(String),

    #[error("models are not nested: {0}")]
    NotNested(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
