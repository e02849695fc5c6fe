//! Per-row mean value coordinate evaluation over a closed triangular cage,
//! following the spherical-triangle formulation of Ju, Schaefer and Warren.

use std::f64::consts::PI;

use nalgebra::Point3;

use super::{MvcConfig, MvcError};
use crate::diff::{Scalar, V3};

/// Margin (as a multiple of the tolerances) inside which a row is considered too
/// close to a branch switch for its derivative to be trusted.
pub(crate) const BRANCH_MARGIN: f64 = 10.0;

pub(crate) enum RowKind<S> {
    /// Query coincides with this cage vertex.
    Vertex(usize),
    /// Query lies on this face; normalised planar mean value weights of its corners.
    Face { face: usize, weights: [f64; 3] },
    /// Generic position: one normalised weight per cage vertex.
    Regular(Vec<S>),
}

pub(crate) struct RowEval<S> {
    pub kind: RowKind<S>,
    /// Within [`BRANCH_MARGIN`] times a tolerance of a branch switch.
    pub near_branch: bool,
    /// Sum of the unnormalised weights.
    pub total: f64,
}

pub(crate) fn eval_row<S: Scalar>(
    verts: &[V3<S>],
    faces: &[[usize; 3]],
    p: &Point3<f64>,
    cfg: &MvcConfig,
    row: usize,
) -> Result<RowEval<S>, MvcError> {
    let mut dist = Vec::with_capacity(verts.len());
    let mut closest = (usize::MAX, f64::INFINITY);
    for (j, v) in verts.iter().enumerate() {
        let d = v.sub_point(p).norm();
        if d.value() < closest.1 {
            closest = (j, d.value());
        }
        dist.push(d);
    }
    if closest.1 < cfg.eps_vertex {
        return Ok(RowEval {
            kind: RowKind::Vertex(closest.0),
            near_branch: true,
            total: 1.0,
        });
    }
    let mut near_branch = closest.1 < BRANCH_MARGIN * cfg.eps_vertex;
    let unit: Vec<V3<S>> = verts
        .iter()
        .zip(&dist)
        .map(|(v, &d)| v.sub_point(p).div(d))
        .collect();

    let mut acc: Vec<Option<S>> = vec![None; verts.len()];
    for (fi, face) in faces.iter().enumerate() {
        let f = eval_face(face.map(|k| unit[k]), face.map(|k| dist[k]), cfg);
        near_branch |= f.near_branch;
        match f.kind {
            FaceKind::OnFace(w) => {
                let total: f64 = w.iter().sum();
                if !(total.abs() > 0.0) {
                    return Err(MvcError::ZeroTotalWeight { row });
                }
                return Ok(RowEval {
                    kind: RowKind::Face {
                        face: fi,
                        weights: w.map(|x| x / total),
                    },
                    near_branch: true,
                    total,
                });
            }
            FaceKind::Skip => {}
            FaceKind::Weights(w) => {
                for i in 0..3 {
                    let slot = &mut acc[face[i]];
                    *slot = Some(match *slot {
                        Some(a) => a + w[i],
                        None => w[i],
                    });
                }
            }
        }
    }

    let mut total: Option<S> = None;
    for w in acc.iter().flatten() {
        total = Some(match total {
            Some(t) => t + *w,
            None => *w,
        });
    }
    let total = match total {
        Some(t) if t.value().is_finite() && t.value().abs() > f64::MIN_POSITIVE => t,
        _ => return Err(MvcError::ZeroTotalWeight { row }),
    };
    let phi = acc
        .into_iter()
        .map(|w| match w {
            Some(w) => w / total,
            None => total.constant_like(0.0),
        })
        .collect();
    Ok(RowEval {
        kind: RowKind::Regular(phi),
        near_branch,
        total: total.value(),
    })
}

pub(crate) enum FaceKind<S> {
    /// The query lies on the triangle; unnormalised planar weights.
    OnFace([f64; 3]),
    /// The triangle is edge-on or its plane passes through the query.
    Skip,
    /// Unnormalised mean value weights of the three corners.
    Weights([S; 3]),
}

pub(crate) struct FaceEval<S> {
    pub kind: FaceKind<S>,
    pub near_branch: bool,
}

/// Contribution of one triangle, given the unit directions `u` from the query to
/// its corners and the corner distances `d`.
pub(crate) fn eval_face<S: Scalar>(u: [V3<S>; 3], d: [S; 3], cfg: &MvcConfig) -> FaceEval<S> {
    let theta: [S; 3] = std::array::from_fn(|i| {
        let l = u[(i + 1) % 3].sub(u[(i + 2) % 3]).norm();
        (l * 0.5).asin() * 2.0
    });
    let h = (theta[0] + theta[1] + theta[2]) * 0.5;
    let gap = PI - h.value();
    // `gap` shrinks with the square of the height above the triangle, so the
    // planar branch also requires the query to lie in the triangle's plane.
    if gap < cfg.eps_plane && plane_distance(&u, &d) <= cfg.eps_vertex {
        let w: [f64; 3] = std::array::from_fn(|i| {
            theta[i].value().sin() * d[(i + 2) % 3].value() * d[(i + 1) % 3].value()
        });
        return FaceEval {
            kind: FaceKind::OnFace(w),
            near_branch: true,
        };
    }
    let mut near_branch = gap < BRANCH_MARGIN * cfg.eps_plane;

    let sin_t = theta.map(|t| t.sin());
    let min_sin = sin_t
        .iter()
        .map(|s| s.value().abs())
        .fold(f64::INFINITY, f64::min);
    if min_sin <= cfg.eps_plane {
        // Two corners seen in the same direction: the triangle is edge-on.
        return FaceEval {
            kind: FaceKind::Skip,
            near_branch: true,
        };
    }
    let sin_h = h.sin();
    let c: [S; 3] = std::array::from_fn(|i| {
        sin_h * (h - theta[i]).sin() * 2.0 / (sin_t[(i + 1) % 3] * sin_t[(i + 2) % 3]) - 1.0
    });
    // s_i = sign(det) · sqrt(1 - c_i²), evaluated as det / (sin θ_{i+1} sin θ_{i-1}):
    // the same quantity without the cancellation in 1 - c_i² near the face.
    let det = u[0].dot(u[1].cross(u[2]));
    let s: [S; 3] = std::array::from_fn(|i| det / (sin_t[(i + 1) % 3] * sin_t[(i + 2) % 3]));
    let min_s = s
        .iter()
        .map(|s| s.value().abs())
        .fold(f64::INFINITY, f64::min);
    if min_s <= cfg.eps_plane {
        // p lies in the plane of the triangle, outside it.
        return FaceEval {
            kind: FaceKind::Skip,
            near_branch: true,
        };
    }
    near_branch |= min_s < BRANCH_MARGIN * cfg.eps_plane;
    let w = std::array::from_fn(|i| {
        let (next, prev) = ((i + 1) % 3, (i + 2) % 3);
        let num = theta[i] - c[next] * theta[prev] - c[prev] * theta[next];
        num / (d[i] * sin_t[next] * s[prev])
    });
    FaceEval {
        kind: FaceKind::Weights(w),
        near_branch,
    }
}

/// Distance from the query to the plane through the three corners.
fn plane_distance<S: Scalar>(u: &[V3<S>; 3], d: &[S; 3]) -> f64 {
    let r: [[f64; 3]; 3] = std::array::from_fn(|i| u[i].values().map(|x| x * d[i].value()));
    let e1 = [r[1][0] - r[0][0], r[1][1] - r[0][1], r[1][2] - r[0][2]];
    let e2 = [r[2][0] - r[0][0], r[2][1] - r[0][1], r[2][2] - r[0][2]];
    let n = [
        e1[1] * e2[2] - e1[2] * e2[1],
        e1[2] * e2[0] - e1[0] * e2[2],
        e1[0] * e2[1] - e1[1] * e2[0],
    ];
    let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    if len == 0.0 {
        return 0.0;
    }
    (n[0] * r[0][0] + n[1] * r[0][1] + n[2] * r[0][2]).abs() / len
}

/// Generalised winding number of the cage around `p` (±1 inside, 0 outside).
pub(crate) fn winding_number(verts: &[Point3<f64>], faces: &[[usize; 3]], p: &Point3<f64>) -> f64 {
    let mut total = 0.0;
    for &[a, b, c] in faces {
        let (a, b, c) = (verts[a] - p, verts[b] - p, verts[c] - p);
        let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
        let num = a.dot(&b.cross(&c));
        let den = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
        total += 2.0 * num.atan2(den);
    }
    total / (4.0 * PI)
}
