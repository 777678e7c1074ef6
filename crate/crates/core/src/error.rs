use thiserror::Error;

use crate::model::ValidationReport;
use crate::numerics::{LinearError, LpError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A table or vector in an instance has the wrong length or a non-finite entry.
    #[error("field `{field}`: {message}")]
    Shape { field: String, message: String },
    #[error("invalid instance: {0}")]
    InvalidInstance(ValidationReport),
    #[error("policy for player {player}: {message}")]
    Policy { player: u8, message: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

impl Error {
    pub(crate) fn shape(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Shape {
            field: field.into(),
            message: message.into(),
        }
    }
}
