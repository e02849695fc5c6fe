//! Objectives and evaluation metrics. Every differentiable term comes with a
//! `*_with_grad` variant returning its gradient.

mod align;
mod breakdown;
mod cage;
mod metrics;
pub(crate) mod shape;
mod total;

pub use align::{
    chamfer, chamfer_with_grad, l2_corresponded, l2_corresponded_with_grad, ChamferGrad,
};
pub use breakdown::{LossBreakdown, LossTerm};
pub use cage::{
    cage_laplacian_loss, cage_laplacian_loss_with_grad, mvc_consistency, mvc_consistency_with_grad,
    mvc_penalty, mvc_penalty_with_grad, NEGATIVE_TOL,
};
pub use metrics::{eval_metrics, EvalMetrics, EVAL_SAMPLES};
pub use shape::{
    normal_loss, p2f_loss, shape_loss, shape_loss_with_grad, symmetry_loss,
    symmetry_loss_with_grad, ShapeLossGrad,
};
pub use total::{total_loss, total_loss_with_grad, TotalLossGrad, TotalLossInput};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::GeometryError;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("empty point set")]
    Empty,
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("invalid loss weights: {0}")]
    InvalidWeights(String),
    #[error("missing derived quantities: {0}")]
    MissingDerived(&'static str),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Which shape-preservation terms apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeMode {
    /// Point-to-plane, normal and symmetry terms.
    #[default]
    ManMade,
    /// Point-to-plane term only.
    Character,
}

/// How the deformed shape is compared with the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignMode {
    #[default]
    Chamfer,
    /// Mean squared distance between corresponding points.
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub alpha_mvc: f64,
    pub alpha_shape: f64,
    pub shape_mode: ShapeMode,
    /// Weight of the cage Laplacian regulariser when fitting cages.
    pub clap_weight: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha_mvc: 1.0,
            alpha_shape: 0.1,
            shape_mode: ShapeMode::ManMade,
            clap_weight: 0.05,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), LossError> {
        let all = [self.alpha_mvc, self.alpha_shape, self.clap_weight];
        if all.iter().all(|w| *w >= 0.0 && w.is_finite()) {
            Ok(())
        } else {
            Err(LossError::InvalidWeights(format!(
                "weights must be finite and non-negative: {self:?}"
            )))
        }
    }
}
