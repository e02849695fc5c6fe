//! Mean value coordinates with respect to a closed triangular cage, and the
//! cage-driven deformation `p'_i = Σ_j φ_ji v'_j`.

mod io;
pub(crate) mod kernel;

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::V3;
use crate::geometry::Cage;
use kernel::{eval_row, winding_number, RowKind};

pub use io::{read_binary, write_binary, write_csv, MAGIC};

#[derive(Debug, Error)]
pub enum MvcError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("row {row}: total weight vanished")]
    ZeroTotalWeight { row: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("malformed matrix file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Robustness thresholds for [`compute_mvc`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MvcConfig {
    /// Queries closer than this to a cage vertex take that vertex's indicator row.
    pub eps_vertex: f64,
    /// Tolerance for flat spherical triangles (query on a face, or in a face's plane).
    pub eps_plane: f64,
}

impl Default for MvcConfig {
    /// Thresholds for a cage of unit diameter.
    fn default() -> Self {
        Self {
            eps_vertex: 1e-8,
            eps_plane: 1e-7,
        }
    }
}

impl MvcConfig {
    /// `eps_vertex = 1e-8 · diameter`, `eps_plane = 1e-7`.
    pub fn for_cage(cage: &Cage) -> Self {
        let diameter = cage.mesh().diameter();
        Self {
            eps_vertex: 1e-8 * if diameter > 0.0 { diameter } else { 1.0 },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), MvcError> {
        if self.eps_vertex > 0.0 && self.eps_plane > 0.0 {
            Ok(())
        } else {
            Err(MvcError::InvalidConfig(format!(
                "tolerances must be strictly positive: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Interior,
    OnVertex,
    OnFace,
    /// Outside the cage; weights may be negative.
    ExteriorOk,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Interior => "interior",
            RowStatus::OnVertex => "on_vertex",
            RowStatus::OnFace => "on_face",
            RowStatus::ExteriorOk => "exterior_ok",
        }
    }
}

/// Dense row-major matrix of coordinates: one row per query point, one column
/// per cage vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct MvcMatrix {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    status: Vec<RowStatus>,
}

impl MvcMatrix {
    /// Builds a matrix from raw row-major weights; every row is marked interior.
    pub fn from_rows(rows: usize, cols: usize, weights: Vec<f64>) -> Result<Self, MvcError> {
        if weights.len() != rows * cols {
            return Err(MvcError::Dimension {
                expected: rows * cols,
                got: weights.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            weights,
            status: vec![RowStatus::Interior; rows],
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.cols + j]
    }

    pub fn status(&self) -> &[RowStatus] {
        &self.status
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    /// Rows restricted to `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut weights = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            weights.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            weights,
            status: indices.iter().map(|&i| self.status[i]).collect(),
        }
    }
}

/// Mean value coordinates of `points` with respect to `cage`.
///
/// Rows are computed independently (in parallel); the result does not depend
/// on the number of threads.
pub fn compute_mvc(
    cage: &Cage,
    points: &[Point3<f64>],
    cfg: &MvcConfig,
) -> Result<MvcMatrix, MvcError> {
    cfg.validate()?;
    let cols = cage.len();
    let verts: Vec<V3<f64>> = cage.vertices().iter().map(V3::from_point).collect();
    let rows: Vec<(Vec<f64>, RowStatus)> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let eval = eval_row::<f64>(&verts, cage.faces(), p, cfg, i)?;
            let mut row = vec![0.0; cols];
            let status = match eval.kind {
                RowKind::Vertex(j) => {
                    row[j] = 1.0;
                    RowStatus::OnVertex
                }
                RowKind::Face { face, weights } => {
                    for (k, &v) in cage.faces()[face].iter().enumerate() {
                        row[v] = weights[k];
                    }
                    RowStatus::OnFace
                }
                RowKind::Regular(phi) => {
                    row = phi;
                    if winding_number(cage.vertices(), cage.faces(), p).abs() > 0.5 {
                        RowStatus::Interior
                    } else {
                        RowStatus::ExteriorOk
                    }
                }
            };
            Ok((row, status))
        })
        .collect::<Result<_, MvcError>>()?;

    let mut weights = Vec::with_capacity(points.len() * cols);
    let mut status = Vec::with_capacity(points.len());
    for (row, s) in rows {
        weights.extend(row);
        status.push(s);
    }
    Ok(MvcMatrix {
        rows: points.len(),
        cols,
        weights,
        status,
    })
}

/// Cage-based deformation: `p'_i = Σ_j φ_ji v'_j`.
pub fn deform(
    mvc: &MvcMatrix,
    deformed_cage: &[Point3<f64>],
) -> Result<Vec<Point3<f64>>, MvcError> {
    if deformed_cage.len() != mvc.cols {
        return Err(MvcError::Dimension {
            expected: mvc.cols,
            got: deformed_cage.len(),
        });
    }
    Ok((0..mvc.rows)
        .map(|i| {
            let p = mvc
                .row(i)
                .iter()
                .zip(deformed_cage)
                .fold(Vector3::zeros(), |acc, (&w, v)| acc + v.coords * w);
            Point3::from(p)
        })
        .collect())
}
