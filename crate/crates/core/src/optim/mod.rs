//! Adam and the optimisation pipelines.
//!
//! - [`deform_pair`]: per-pair registration parameterised by a source cage and
//!   its offsets.
//! - [`fit_cage`]: fits a template cage to a novel shape by matching the
//!   coordinates of corresponding landmarks.
//! - [`transfer`]: applies stored cage offsets to a fitted cage.

mod adam;
mod config;
mod fit;
mod pair;
mod report;
mod transfer;

pub use adam::{adam_step, AdamState};
pub use config::{
    CageUpdate, PipelineConfig, FIT_CONSISTENCY_THRESHOLD, FIT_MAX_ITERS, FIT_STEP_SIZE,
    PAIR_MAX_ITERS, PAIR_STEP_SIZE,
};
pub use fit::{fit_cage, FitResult};
pub use pair::{deform_pair, deform_pair_from, initial_cage, PairResult, COLLAPSE_AREA};
pub use report::{OptimReport, StopReason};
pub use transfer::{
    load_offsets, parse_offsets_csv, save_offsets, transfer, transfer_mesh, write_offsets_csv,
    LandmarkPairs,
};

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::losses::LossError;
use crate::mvc::MvcError;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite gradient entry {index} ({value}) at Adam step {iteration}")]
    NonFiniteGradient {
        iteration: u64,
        index: usize,
        value: f64,
    },
    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss {
        iteration: usize,
        report: Box<OptimReport>,
    },
    #[error("cage collapsed at iteration {iteration}: face area {area:e}")]
    CollapsedCage {
        iteration: usize,
        area: f64,
        report: Box<OptimReport>,
    },
    #[error("diverged at iteration {iteration}: loss {loss:e} exceeds 1e3 x initial {initial:e}")]
    Diverged {
        iteration: usize,
        loss: f64,
        initial: f64,
        report: Box<OptimReport>,
    },
    #[error("landmark {index} out of range ({count} points)")]
    LandmarkOutOfRange { index: usize, count: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Mvc(#[from] MvcError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl OptimError {
    /// The partial report of an aborted run, if any.
    pub fn report(&self) -> Option<&OptimReport> {
        match self {
            Self::NonFiniteLoss { report, .. }
            | Self::CollapsedCage { report, .. }
            | Self::Diverged { report, .. } => Some(report),
            _ => None,
        }
    }
}

/// Flattens points into `[x0, y0, z0, x1, ...]`.
pub(crate) fn flatten(points: &[nalgebra::Point3<f64>]) -> Vec<f64> {
    points.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
}

pub(crate) fn unflatten(values: &[f64]) -> Vec<nalgebra::Point3<f64>> {
    values
        .chunks_exact(3)
        .map(|c| nalgebra::Point3::new(c[0], c[1], c[2]))
        .collect()
}

pub(crate) fn flatten_vectors(vectors: &[nalgebra::Vector3<f64>]) -> Vec<f64> {
    vectors.iter().flat_map(|v| [v.x, v.y, v.z]).collect()
}
