use nalgebra::{Point3, Vector3};

use super::LossError;
use crate::geometry::CotLaplacian;
use crate::mvc::MvcMatrix;

/// Coordinates above `-NEGATIVE_TOL` count as non-negative in [`mvc_penalty`].
pub const NEGATIVE_TOL: f64 = 1e-15;

fn negative_part(w: f64) -> f64 {
    if w < -NEGATIVE_TOL {
        w
    } else {
        0.0
    }
}

/// `1/(|C||S|) Σ_i Σ_j min(φ_ji, 0)²`, ignoring rounding-level negatives.
pub fn mvc_penalty(mvc: &MvcMatrix) -> f64 {
    let n = (mvc.rows() * mvc.cols()) as f64;
    if n == 0.0 {
        return 0.0;
    }
    mvc.weights()
        .iter()
        .map(|&w| negative_part(w).powi(2))
        .sum::<f64>()
        / n
}

/// Value and `∂/∂φ` (row-major).
pub fn mvc_penalty_with_grad(mvc: &MvcMatrix) -> (f64, Vec<f64>) {
    let n = (mvc.rows() * mvc.cols()) as f64;
    let grad = mvc
        .weights()
        .iter()
        .map(|&w| 2.0 * negative_part(w) / n)
        .collect();
    (mvc_penalty(mvc), grad)
}

/// `Σ_j Σ_k (φ_j(p_k) - φ'_j(q_k))²` over corresponding landmark rows.
pub fn mvc_consistency(template: &MvcMatrix, fitted: &MvcMatrix) -> Result<f64, LossError> {
    check_same_shape(template, fitted)?;
    Ok(template
        .weights()
        .iter()
        .zip(fitted.weights())
        .map(|(a, b)| (a - b).powi(2))
        .sum())
}

/// Value and gradient with respect to the fitted coordinates.
pub fn mvc_consistency_with_grad(
    template: &MvcMatrix,
    fitted: &MvcMatrix,
) -> Result<(f64, Vec<f64>), LossError> {
    let value = mvc_consistency(template, fitted)?;
    let grad = template
        .weights()
        .iter()
        .zip(fitted.weights())
        .map(|(a, b)| 2.0 * (b - a))
        .collect();
    Ok((value, grad))
}

fn check_same_shape(a: &MvcMatrix, b: &MvcMatrix) -> Result<(), LossError> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(LossError::SizeMismatch(format!(
            "{}x{} vs {}x{} coordinate matrices",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(())
}

/// `Σ_j (‖(L v)_j‖ - ‖(L v')_j‖)²` with `L` built from the cage before fitting.
pub fn cage_laplacian_loss(
    lap: &CotLaplacian,
    before: &[Point3<f64>],
    after: &[Point3<f64>],
) -> Result<f64, LossError> {
    cage_laplacian_loss_with_grad(lap, before, after).map(|(v, _)| v)
}

pub fn cage_laplacian_loss_with_grad(
    lap: &CotLaplacian,
    before: &[Point3<f64>],
    after: &[Point3<f64>],
) -> Result<(f64, Vec<Vector3<f64>>), LossError> {
    if before.len() != lap.len() || after.len() != lap.len() {
        return Err(LossError::SizeMismatch(format!(
            "Laplacian of size {} applied to {} and {} vertices",
            lap.len(),
            before.len(),
            after.len()
        )));
    }
    let lb = lap.apply_points(before);
    let la = lap.apply_points(after);
    let mut value = 0.0;
    let mut ybar = Vec::with_capacity(la.len());
    for (b, a) in lb.iter().zip(&la) {
        let (nb, na) = (b.norm(), a.norm());
        let r = nb - na;
        value += r * r;
        ybar.push(if na > 0.0 {
            a * (-2.0 * r / na)
        } else {
            Vector3::zeros()
        });
    }
    // L is symmetric, so Lᵀ ȳ = L ȳ.
    Ok((value, lap.apply_vectors(&ybar)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn penalty_arithmetic() {
        let m = MvcMatrix::from_rows(2, 2, vec![0.5, 0.5, -0.5, 1.5]).unwrap();
        assert!((mvc_penalty(&m) - 0.0625).abs() < 1e-16);
        let m = MvcMatrix::from_rows(1, 2, vec![0.25, 0.75]).unwrap();
        assert_eq!(mvc_penalty(&m), 0.0);
        let m = MvcMatrix::from_rows(1, 2, vec![-1e-16, 1.0 + 1e-16]).unwrap();
        assert_eq!(mvc_penalty(&m), 0.0);
    }

    #[test]
    fn consistency_arithmetic() {
        let a = MvcMatrix::from_rows(1, 4, vec![0.25; 4]).unwrap();
        let b = MvcMatrix::from_rows(1, 4, vec![0.35, 0.15, 0.25, 0.25]).unwrap();
        assert!((mvc_consistency(&a, &b).unwrap() - 0.02).abs() < 1e-15);
        assert_eq!(mvc_consistency(&a, &a).unwrap(), 0.0);
        let c = MvcMatrix::from_rows(2, 2, vec![0.5; 4]).unwrap();
        assert!(mvc_consistency(&a, &c).is_err());
    }
}
