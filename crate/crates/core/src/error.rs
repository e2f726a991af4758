use thiserror::Error;

use crate::quadrature::QuadError;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parameter out of range for {family}: {detail}")]
    Parameter { family: &'static str, detail: String },

    #[error("family `{0}` has no location-scale reduction")]
    UnsupportedFamily(String),

    #[error("score undefined at z = {0} (kernel not differentiable there)")]
    NonDifferentiable(f64),

    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadError),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("theorem {theorem} does not apply to kernel `{kernel}`")]
    Incompatible { theorem: u8, kernel: String },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
