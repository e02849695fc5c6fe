use nalgebra::{Point3, Vector3};
use rayon::prelude::*;

use super::LossError;
use crate::geometry::KdTree;

#[derive(Debug, Clone, PartialEq)]
pub struct ChamferGrad {
    pub value: f64,
    pub grad_a: Vec<Vector3<f64>>,
    pub grad_b: Vec<Vector3<f64>>,
}

/// Symmetric chamfer distance: mean squared nearest-neighbour distance from `a`
/// to `b` plus the same from `b` to `a`.
pub fn chamfer(a: &[Point3<f64>], b: &[Point3<f64>]) -> Result<f64, LossError> {
    if a.is_empty() || b.is_empty() {
        return Err(LossError::Empty);
    }
    Ok(one_way(a, b).0 + one_way(b, a).0)
}

pub fn chamfer_with_grad(a: &[Point3<f64>], b: &[Point3<f64>]) -> Result<ChamferGrad, LossError> {
    if a.is_empty() || b.is_empty() {
        return Err(LossError::Empty);
    }
    let (ab, nn_ab) = one_way(a, b);
    let (ba, nn_ba) = one_way(b, a);
    let mut grad_a = vec![Vector3::zeros(); a.len()];
    let mut grad_b = vec![Vector3::zeros(); b.len()];
    let (sa, sb) = (2.0 / a.len() as f64, 2.0 / b.len() as f64);
    for (i, &j) in nn_ab.iter().enumerate() {
        let d = (a[i] - b[j]) * sa;
        grad_a[i] += d;
        grad_b[j] -= d;
    }
    for (j, &i) in nn_ba.iter().enumerate() {
        let d = (b[j] - a[i]) * sb;
        grad_b[j] += d;
        grad_a[i] -= d;
    }
    Ok(ChamferGrad {
        value: ab + ba,
        grad_a,
        grad_b,
    })
}

/// Mean squared distance from each point of `from` to its nearest point in `to`,
/// with the nearest indices.
fn one_way(from: &[Point3<f64>], to: &[Point3<f64>]) -> (f64, Vec<usize>) {
    let tree = KdTree::build(to);
    let hits: Vec<(usize, f64)> = from
        .par_iter()
        .map(|p| tree.nearest(p).expect("non-empty tree"))
        .collect();
    let sum: f64 = hits.iter().map(|h| h.1).sum();
    (
        sum / from.len() as f64,
        hits.into_iter().map(|h| h.0).collect(),
    )
}

/// Mean of `‖a_i - b_i‖²`.
pub fn l2_corresponded(a: &[Point3<f64>], b: &[Point3<f64>]) -> Result<f64, LossError> {
    check_pairs(a, b)?;
    Ok(a.iter()
        .zip(b)
        .map(|(p, q)| (p - q).norm_squared())
        .sum::<f64>()
        / a.len() as f64)
}

/// Value and gradient with respect to `a`.
pub fn l2_corresponded_with_grad(
    a: &[Point3<f64>],
    b: &[Point3<f64>],
) -> Result<(f64, Vec<Vector3<f64>>), LossError> {
    let value = l2_corresponded(a, b)?;
    let s = 2.0 / a.len() as f64;
    Ok((value, a.iter().zip(b).map(|(p, q)| (p - q) * s).collect()))
}

fn check_pairs(a: &[Point3<f64>], b: &[Point3<f64>]) -> Result<(), LossError> {
    if a.len() != b.len() {
        return Err(LossError::SizeMismatch(format!(
            "{} vs {} points",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(LossError::Empty);
    }
    Ok(())
}
