use thiserror::Error;

use crate::geometry::GeometryError;
use crate::losses::LossError;
use crate::mvc::MvcError;
use crate::optim::OptimError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Top-level error, wrapping the per-module error types.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Mvc(#[from] MvcError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
