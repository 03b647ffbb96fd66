use thiserror::Error;

use crate::exprdsl::{EvalError, ParseError};
use crate::geometry::GeometryError;
use crate::normal::ConeEstimationError;

/// Crate-wide error. Each variant names the module that raised it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("exprdsl: {0}")]
    Parse(#[from] ParseError),
    #[error("exprdsl: {0}")]
    Eval(#[from] EvalError),
    #[error("normal: {0}")]
    Cone(#[from] ConeEstimationError),
    #[error("{module}: {message}")]
    Model { module: &'static str, message: String },
    #[error("{module}: usage: {message}")]
    Usage { module: &'static str, message: String },
    #[error("vi: certificate invalid: {0}")]
    CertificateInvalid(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema: {0}")]
    Schema(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn model(module: &'static str, message: impl Into<String>) -> Self {
        Error::Model {
            module,
            message: message.into(),
        }
    }

    pub fn usage(module: &'static str, message: impl Into<String>) -> Self {
        Error::Usage {
            module,
            message: message.into(),
        }
    }
}
