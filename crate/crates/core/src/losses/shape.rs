use nalgebra::{Point3, Vector3};

use super::{chamfer, chamfer_with_grad, LossBreakdown, LossError, ShapeMode};
use crate::geometry::{reflect_x_points, PcaJet, PointSet};

fn frames_of(set: &PointSet) -> Result<&[crate::geometry::PcaFrame], LossError> {
    set.frames().ok_or(LossError::MissingDerived("PCA frames"))
}

fn check_pair(before: &PointSet, after: &PointSet) -> Result<(), LossError> {
    let (fb, fa) = (frames_of(before)?, frames_of(after)?);
    if fb.len() != fa.len() {
        return Err(LossError::SizeMismatch(format!(
            "{} vs {} frames",
            fb.len(),
            fa.len()
        )));
    }
    if fb.is_empty() {
        return Err(LossError::Empty);
    }
    Ok(())
}

/// Mean of `(d_i - d'_i)²` over precomputed point-to-plane offsets.
pub fn p2f_loss(before: &PointSet, after: &PointSet) -> Result<f64, LossError> {
    check_pair(before, after)?;
    let (fb, fa) = (frames_of(before)?, frames_of(after)?);
    Ok(fb
        .iter()
        .zip(fa)
        .map(|(b, a)| (b.offset - a.offset).powi(2))
        .sum::<f64>()
        / fb.len() as f64)
}

/// Mean of `1 - |n_iᵀ n'_i|`: the post-deformation normal is flipped onto the
/// pre-deformation one before comparing.
pub fn normal_loss(before: &PointSet, after: &PointSet) -> Result<f64, LossError> {
    check_pair(before, after)?;
    let (fb, fa) = (frames_of(before)?, frames_of(after)?);
    Ok(fb
        .iter()
        .zip(fa)
        .map(|(b, a)| 1.0 - b.normal.dot(&a.normal).abs())
        .sum::<f64>()
        / fb.len() as f64)
}

/// Chamfer distance between the points and their mirror image through `x = 0`.
pub fn symmetry_loss(points: &[Point3<f64>]) -> Result<f64, LossError> {
    chamfer(points, &reflect_x_points(points))
}

pub fn symmetry_loss_with_grad(
    points: &[Point3<f64>],
) -> Result<(f64, Vec<Vector3<f64>>), LossError> {
    let c = chamfer_with_grad(points, &reflect_x_points(points))?;
    let grad = c
        .grad_a
        .iter()
        .zip(&c.grad_b)
        .map(|(ga, gb)| ga + Vector3::new(-gb.x, gb.y, gb.z))
        .collect();
    Ok((c.value, grad))
}

/// Shape-preservation terms with their gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeLossGrad {
    /// Unit-weight terms: `p2f`, and for man-made shapes `normal`,
    /// `symm_shape` and `symm_cage`.
    pub breakdown: LossBreakdown,
    pub d_after: Vec<Vector3<f64>>,
    pub d_cage: Vec<Vector3<f64>>,
}

/// Shape-preservation loss between `before` (carrying neighbourhoods and PCA
/// frames) and the deformed positions `after`, which reuse `before`'s
/// neighbourhoods. The symmetry term is also applied to `cage`.
pub fn shape_loss(
    before: &PointSet,
    after: &[Point3<f64>],
    cage: &[Point3<f64>],
    mode: ShapeMode,
) -> Result<LossBreakdown, LossError> {
    shape_loss_with_grad(before, after, cage, mode).map(|g| g.breakdown)
}

pub fn shape_loss_with_grad(
    before: &PointSet,
    after: &[Point3<f64>],
    cage: &[Point3<f64>],
    mode: ShapeMode,
) -> Result<ShapeLossGrad, LossError> {
    let man_made = mode == ShapeMode::ManMade;
    let local = local_terms(before, after, man_made)?;
    let mut breakdown = LossBreakdown::new();
    breakdown.push("p2f", 1.0, local.p2f);
    let mut d_after = local.d_p2f;
    let mut d_cage = vec![Vector3::zeros(); cage.len()];
    if man_made {
        breakdown.push("normal", 1.0, local.normal);
        for (g, n) in d_after.iter_mut().zip(&local.d_normal) {
            *g += n;
        }
        let (sv, sg) = symmetry_loss_with_grad(after)?;
        breakdown.push("symm_shape", 1.0, sv);
        for (g, s) in d_after.iter_mut().zip(&sg) {
            *g += s;
        }
        if !cage.is_empty() {
            let (cv, cg) = symmetry_loss_with_grad(cage)?;
            breakdown.push("symm_cage", 1.0, cv);
            d_cage = cg;
        }
    }
    Ok(ShapeLossGrad {
        breakdown,
        d_after,
        d_cage,
    })
}

pub(crate) struct LocalTerms {
    pub p2f: f64,
    pub normal: f64,
    pub d_p2f: Vec<Vector3<f64>>,
    pub d_normal: Vec<Vector3<f64>>,
}

/// Point-to-plane and normal terms with gradients with respect to `after`.
pub(crate) fn local_terms(
    before: &PointSet,
    after: &[Point3<f64>],
    with_normal: bool,
) -> Result<LocalTerms, LossError> {
    let frames = frames_of(before)?;
    let nbs = before
        .neighborhoods()
        .ok_or(LossError::MissingDerived("neighbourhoods"))?;
    if after.len() != frames.len() {
        return Err(LossError::SizeMismatch(format!(
            "{} frames for {} points",
            frames.len(),
            after.len()
        )));
    }
    if after.is_empty() {
        return Err(LossError::Empty);
    }
    let n = after.len() as f64;
    let mut p2f = 0.0;
    let mut normal = 0.0;
    let mut d_p2f = vec![Vector3::zeros(); after.len()];
    let mut d_normal = vec![Vector3::zeros(); after.len()];
    let mut nb_pts = Vec::new();
    for (i, (frame, nb)) in frames.iter().zip(nbs).enumerate() {
        if nb.len() < 3 {
            return Err(crate::geometry::GeometryError::TooFewNeighbors {
                index: i,
                count: nb.len(),
            }
            .into());
        }
        nb_pts.clear();
        nb_pts.extend(nb.iter().map(|&j| after[j]));
        let jet = PcaJet::new(&after[i], nb_pts.iter().copied());
        let m = nb.len() as f64;
        let af = &jet.frame;

        let r = frame.offset - af.offset;
        p2f += r * r;
        // d' = |s|, s = n'·(p - c')
        let sbar = -2.0 * r / n * signum0(jet.signed_offset);
        if sbar != 0.0 {
            d_p2f[i] += af.normal * sbar;
            let back = jet.normal_vjp(&nb_pts, &((after[i] - af.centroid) * sbar));
            for (&j, g) in nb.iter().zip(back) {
                d_p2f[j] += g - af.normal * (sbar / m);
            }
        }

        if with_normal {
            let dot = frame.normal.dot(&af.normal);
            normal += 1.0 - dot.abs();
            let nbar = frame.normal * (-signum0(dot) / n);
            for (&j, g) in nb.iter().zip(jet.normal_vjp(&nb_pts, &nbar)) {
                d_normal[j] += g;
            }
        }
    }
    Ok(LocalTerms {
        p2f: p2f / n,
        normal: normal / n,
        d_p2f,
        d_normal,
    })
}

fn signum0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetry_closed_forms() {
        let pair = [Point3::new(1.0, 0.0, 0.0), Point3::new(-1.0, 0.0, 0.0)];
        assert_eq!(symmetry_loss(&pair).unwrap(), 0.0);
        assert_eq!(symmetry_loss(&pair[..1]).unwrap(), 8.0);
        let plane = [Point3::new(0.0, 1.0, 2.0), Point3::new(0.0, -3.0, 0.5)];
        assert_eq!(symmetry_loss(&plane).unwrap(), 0.0);
    }
}
