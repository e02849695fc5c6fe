use nalgebra::{Point3, Vector3};
use rayon::prelude::*;

use super::{Dual, Jet, Tape, Var, V3};
use crate::geometry::Cage;
use crate::mvc::kernel::{eval_face, eval_row, FaceKind, RowKind};
use crate::mvc::{MvcConfig, MvcError, MvcMatrix};

/// Gradient of a scalar loss with respect to the cage layer's inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub d_loss_d_deformed_cage: Vec<Vector3<f64>>,
    pub d_loss_d_source_cage: Option<Vec<Vector3<f64>>>,
    /// Rows skipped by the source-cage derivative (near a branch switch).
    pub excluded_rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceCageGrad {
    pub grad: Vec<Vector3<f64>>,
    /// Rows with a non-zero downstream adjoint that were too close to a branch
    /// switch (cage vertex, face, or face plane) and contribute nothing.
    pub excluded_rows: Vec<usize>,
}

/// `∂L/∂v'_j = Σ_i φ_ji ∂L/∂p'_i`, summed in row order.
pub fn grad_deformed(
    mvc: &MvcMatrix,
    dl_dp: &[Vector3<f64>],
) -> Result<Vec<Vector3<f64>>, MvcError> {
    if dl_dp.len() != mvc.rows() {
        return Err(MvcError::Dimension {
            expected: mvc.rows(),
            got: dl_dp.len(),
        });
    }
    let mut out = vec![Vector3::zeros(); mvc.cols()];
    for (i, g) in dl_dp.iter().enumerate() {
        for (o, &w) in out.iter_mut().zip(mvc.row(i)) {
            *o += g * w;
        }
    }
    Ok(out)
}

/// Pulls `∂L/∂φ` (row-major, same shape as the coordinate matrix of `points`)
/// back onto the source cage vertex positions.
///
/// Each face's weights depend only on its three corners, so the partials of a
/// face are carried forward as nine-component [`Jet`]s.
pub fn grad_source_cage(
    cage: &Cage,
    points: &[Point3<f64>],
    cfg: &MvcConfig,
    dl_dphi: &[f64],
) -> Result<SourceCageGrad, MvcError> {
    source_cage_driver(
        cage,
        points,
        cfg,
        dl_dphi,
        || (),
        |_, p, face, cfg, wbar, grad| jet_face(cage, p, face, cfg, wbar, grad),
    )
}

/// Same as [`grad_source_cage`], with every face recorded on a [`Tape`] and
/// accumulated in reverse.
pub fn grad_source_cage_tape(
    cage: &Cage,
    points: &[Point3<f64>],
    cfg: &MvcConfig,
    dl_dphi: &[f64],
) -> Result<SourceCageGrad, MvcError> {
    source_cage_driver(
        cage,
        points,
        cfg,
        dl_dphi,
        || (Tape::with_capacity(256), Vec::new()),
        |(tape, adj), p, face, cfg, wbar, grad| {
            tape_face(cage, p, face, cfg, wbar, grad, tape, adj)
        },
    )
}

fn source_cage_driver<St, I, F>(
    cage: &Cage,
    points: &[Point3<f64>],
    cfg: &MvcConfig,
    dl_dphi: &[f64],
    init: I,
    face_fn: F,
) -> Result<SourceCageGrad, MvcError>
where
    I: Fn() -> St + Sync + Send,
    F: Fn(&mut St, &Point3<f64>, [usize; 3], &MvcConfig, &[f64], &mut [Vector3<f64>]) + Sync + Send,
{
    cfg.validate()?;
    let cols = cage.len();
    if dl_dphi.len() != points.len() * cols {
        return Err(MvcError::Dimension {
            expected: points.len() * cols,
            got: dl_dphi.len(),
        });
    }
    let verts: Vec<V3<f64>> = cage.vertices().iter().map(V3::from_point).collect();
    let rows: Vec<Option<Vec<Vector3<f64>>>> = points
        .par_iter()
        .enumerate()
        .map_init(
            &init,
            |state, (i, p)| -> Result<Option<Vec<Vector3<f64>>>, MvcError> {
                let seed = &dl_dphi[i * cols..(i + 1) * cols];
                if seed.iter().all(|&s| s == 0.0) {
                    return Ok(Some(Vec::new()));
                }
                let Some(wbar) = row_adjoint(cage, &verts, p, cfg, i, seed)? else {
                    return Ok(None);
                };
                let mut grad = vec![Vector3::zeros(); cols];
                for &face in cage.faces() {
                    if face.iter().any(|&k| wbar[k] != 0.0) {
                        face_fn(state, p, face, cfg, &wbar, &mut grad);
                    }
                }
                Ok(Some(grad))
            },
        )
        .collect::<Result<_, _>>()?;

    let mut grad = vec![Vector3::zeros(); cols];
    let mut excluded_rows = Vec::new();
    for (i, row) in rows.into_iter().enumerate() {
        match row {
            Some(g) => {
                for (o, gi) in grad.iter_mut().zip(&g) {
                    *o += gi;
                }
            }
            None => excluded_rows.push(i),
        }
    }
    Ok(SourceCageGrad {
        grad,
        excluded_rows,
    })
}

/// Adjoint of the unnormalised weights of one row, `None` when the row is
/// excluded.
///
/// With `φ_j = w_j / W`, `w̄_j = (ȳ_j - Σ_k ȳ_k φ_k) / W`.
fn row_adjoint(
    cage: &Cage,
    verts: &[V3<f64>],
    p: &Point3<f64>,
    cfg: &MvcConfig,
    row: usize,
    seed: &[f64],
) -> Result<Option<Vec<f64>>, MvcError> {
    let eval = eval_row(verts, cage.faces(), p, cfg, row)?;
    let phi = match eval.kind {
        RowKind::Regular(phi) if !eval.near_branch => phi,
        _ => return Ok(None),
    };
    let mean: f64 = seed.iter().zip(&phi).map(|(s, f)| s * f).sum();
    Ok(Some(seed.iter().map(|s| (s - mean) / eval.total).collect()))
}

fn jet_face(
    cage: &Cage,
    p: &Point3<f64>,
    face: [usize; 3],
    cfg: &MvcConfig,
    wbar: &[f64],
    grad: &mut [Vector3<f64>],
) {
    let rel: [V3<Jet<9>>; 3] = std::array::from_fn(|c| {
        let v = &cage.vertices()[face[c]];
        V3::new(
            Jet::variable(v.x - p.x, 3 * c),
            Jet::variable(v.y - p.y, 3 * c + 1),
            Jet::variable(v.z - p.z, 3 * c + 2),
        )
    });
    let d = rel.map(|r| r.norm());
    let u = std::array::from_fn(|k| rel[k].div(d[k]));
    if let FaceKind::Weights(w) = eval_face(u, d, cfg).kind {
        let mut acc = [0.0; 9];
        for (wk, &k) in w.iter().zip(&face) {
            let s = wbar[k];
            for (a, dw) in acc.iter_mut().zip(&wk.d) {
                *a += s * dw;
            }
        }
        for (c, &k) in face.iter().enumerate() {
            grad[k] += Vector3::new(acc[3 * c], acc[3 * c + 1], acc[3 * c + 2]);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn tape_face(
    cage: &Cage,
    p: &Point3<f64>,
    face: [usize; 3],
    cfg: &MvcConfig,
    wbar: &[f64],
    grad: &mut [Vector3<f64>],
    tape: &mut Tape,
    adj: &mut Vec<f64>,
) {
    tape.clear();
    let t: &Tape = tape;
    let corners = face.map(|k| {
        let v = &cage.vertices()[k];
        V3::new(t.var(v.x), t.var(v.y), t.var(v.z))
    });
    let rel = corners.map(|c| c.sub_point(p));
    let d = rel.map(|r| r.norm());
    let u = std::array::from_fn(|k| rel[k].div(d[k]));
    if let FaceKind::Weights(w) = eval_face(u, d, cfg).kind {
        let seeds: [(Var<'_>, f64); 3] = std::array::from_fn(|k| (w[k], wbar[face[k]]));
        t.gradient_into(&seeds, adj);
        let at = |v: &Var<'_>| v.index().map_or(0.0, |k| adj[k]);
        for (c, &k) in corners.iter().zip(&face) {
            grad[k] += Vector3::new(at(&c.x), at(&c.y), at(&c.z));
        }
    }
}

/// Full vector-Jacobian product of `p' = Σ φ_j(source) v'_j`.
///
/// `extra_dl_dphi` carries any loss terms that depend on the coordinates directly
/// (e.g. the negative-coordinate penalty).
pub fn cage_layer_vjp(
    cage: &Cage,
    points: &[Point3<f64>],
    cfg: &MvcConfig,
    mvc: &MvcMatrix,
    deformed_cage: &[Point3<f64>],
    dl_dp: &[Vector3<f64>],
    extra_dl_dphi: Option<&[f64]>,
) -> Result<Gradient, MvcError> {
    let d_deformed = grad_deformed(mvc, dl_dp)?;
    let cols = mvc.cols();
    let mut dphi = match extra_dl_dphi {
        Some(e) if e.len() == mvc.rows() * cols => e.to_vec(),
        Some(e) => {
            return Err(MvcError::Dimension {
                expected: mvc.rows() * cols,
                got: e.len(),
            })
        }
        None => vec![0.0; mvc.rows() * cols],
    };
    for (i, g) in dl_dp.iter().enumerate() {
        for (j, v) in deformed_cage.iter().enumerate() {
            dphi[i * cols + j] += g.dot(&v.coords);
        }
    }
    let source = grad_source_cage(cage, points, cfg, &dphi)?;
    Ok(Gradient {
        d_loss_d_deformed_cage: d_deformed,
        d_loss_d_source_cage: Some(source.grad),
        excluded_rows: source.excluded_rows.len(),
    })
}

/// Forward-mode directional derivative of the coordinate matrix when the source
/// cage moves along `direction`. Rows near a branch switch are returned as zeros.
pub fn mvc_jvp(
    cage: &Cage,
    points: &[Point3<f64>],
    cfg: &MvcConfig,
    direction: &[Vector3<f64>],
) -> Result<Vec<f64>, MvcError> {
    if direction.len() != cage.len() {
        return Err(MvcError::Dimension {
            expected: cage.len(),
            got: direction.len(),
        });
    }
    let verts: Vec<V3<Dual>> = cage
        .vertices()
        .iter()
        .zip(direction)
        .map(|(v, d)| {
            V3::new(
                Dual::new(v.x, d.x),
                Dual::new(v.y, d.y),
                Dual::new(v.z, d.z),
            )
        })
        .collect();
    let mut out = Vec::with_capacity(points.len() * cage.len());
    for (i, p) in points.iter().enumerate() {
        let eval = eval_row(&verts, cage.faces(), p, cfg, i)?;
        match eval.kind {
            RowKind::Regular(phi) if !eval.near_branch => out.extend(phi.iter().map(|x| x.d)),
            _ => out.extend(std::iter::repeat_n(0.0, cage.len())),
        }
    }
    Ok(out)
}
