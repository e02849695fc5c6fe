use nalgebra::{Point3, Vector3};

use super::{
    chamfer_with_grad, l2_corresponded_with_grad, mvc_penalty_with_grad, shape_loss_with_grad,
    AlignMode, LossBreakdown, LossError, LossWeights,
};
use crate::geometry::PointSet;
use crate::mvc::MvcMatrix;

/// Inputs of the combined objective `α_MVC·L_MVC + L_align + α_shape·L_shape`.
#[derive(Debug, Clone, Copy)]
pub struct TotalLossInput<'a> {
    /// Undeformed shape with neighbourhoods and PCA frames.
    pub source: &'a PointSet,
    /// Deformed positions of `source.points`.
    pub deformed: &'a [Point3<f64>],
    /// Target points (corresponding to `deformed` index by index in L2 mode).
    pub target: &'a [Point3<f64>],
    /// Coordinates of `source.points` with respect to `source_cage`.
    pub mvc: &'a MvcMatrix,
    /// Source cage vertices; the symmetry term of man-made shapes applies to them.
    pub source_cage: &'a [Point3<f64>],
    pub weights: &'a LossWeights,
    pub align: AlignMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TotalLossGrad {
    pub breakdown: LossBreakdown,
    pub d_deformed: Vec<Vector3<f64>>,
    /// Gradient with respect to the coordinates (row-major), from the penalty term.
    pub d_phi: Vec<f64>,
    /// Gradient with respect to the source cage vertices, from the cage symmetry term.
    pub d_source_cage: Vec<Vector3<f64>>,
}

pub fn total_loss(input: &TotalLossInput<'_>) -> Result<LossBreakdown, LossError> {
    total_loss_with_grad(input).map(|g| g.breakdown)
}

pub fn total_loss_with_grad(input: &TotalLossInput<'_>) -> Result<TotalLossGrad, LossError> {
    let w = input.weights;
    w.validate()?;
    if input.mvc.rows() != input.deformed.len() {
        return Err(LossError::SizeMismatch(format!(
            "{} coordinate rows for {} deformed points",
            input.mvc.rows(),
            input.deformed.len()
        )));
    }
    let mut breakdown = LossBreakdown::new();

    let (mvc_value, mut d_phi) = mvc_penalty_with_grad(input.mvc);
    breakdown.push("mvc", w.alpha_mvc, mvc_value);
    d_phi.iter_mut().for_each(|g| *g *= w.alpha_mvc);

    let (align_value, mut d_deformed) = match input.align {
        AlignMode::Chamfer => {
            let c = chamfer_with_grad(input.deformed, input.target)?;
            (c.value, c.grad_a)
        }
        AlignMode::L2 => l2_corresponded_with_grad(input.deformed, input.target)?,
    };
    breakdown.push("align", 1.0, align_value);

    let shape = shape_loss_with_grad(
        input.source,
        input.deformed,
        input.source_cage,
        w.shape_mode,
    )?;
    for (name, term) in &shape.breakdown.terms {
        breakdown.push(name, w.alpha_shape * term.weight, term.value);
    }
    for (g, s) in d_deformed.iter_mut().zip(&shape.d_after) {
        *g += s * w.alpha_shape;
    }
    let d_source_cage = shape.d_cage.iter().map(|g| g * w.alpha_shape).collect();

    Ok(TotalLossGrad {
        breakdown,
        d_deformed,
        d_phi,
        d_source_cage,
    })
}
