use std::collections::{BTreeMap, HashMap};

use nalgebra::{Point3, Vector3};

use super::{GeometryError, TriMesh};

/// Sparse cotangent Laplacian.
///
/// Off-diagonal entries are `w_ij = (cot α_ij + cot β_ij) / 2`, the diagonal is
/// `-Σ_j w_ij`, so `(L v)_i = Σ_j w_ij (v_j - v_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CotLaplacian {
    /// Off-diagonal entries per row, sorted by column.
    rows: Vec<Vec<(usize, f64)>>,
    diagonal: Vec<f64>,
}

impl CotLaplacian {
    pub fn new(mesh: &TriMesh) -> Result<Self, GeometryError> {
        let n = mesh.vertices.len();
        let mut incident: HashMap<(usize, usize), u32> = HashMap::new();
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for &[a, b, c] in &mesh.faces {
            // Each corner contributes the cotangent of its angle to the opposite edge.
            for (i, j, k) in [(a, b, c), (b, c, a), (c, a, b)] {
                let key = (i.min(j), i.max(j));
                let count = incident.entry(key).or_default();
                *count += 1;
                if *count > 2 {
                    return Err(GeometryError::NonManifoldEdge(key.0, key.1));
                }
                let half_cot =
                    0.5 * cot_at(&mesh.vertices[k], &mesh.vertices[i], &mesh.vertices[j]);
                *rows[i].entry(j).or_default() += half_cot;
                *rows[j].entry(i).or_default() += half_cot;
            }
        }
        let rows: Vec<Vec<(usize, f64)>> =
            rows.into_iter().map(|r| r.into_iter().collect()).collect();
        let diagonal = rows
            .iter()
            .map(|r| -r.iter().map(|&(_, w)| w).sum::<f64>())
            .collect();
        Ok(Self { rows, diagonal })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diagonal[i];
        }
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map_or(0.0, |k| self.rows[i][k].1)
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        (0..n)
            .map(|i| (0..n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// `L · 1` per row, through the stored matrix entries.
    pub fn row_sums(&self) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.diagonal)
            .map(|(r, d)| d + r.iter().map(|&(_, w)| w).sum::<f64>())
            .collect()
    }

    pub fn apply_scalar(&self, values: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.diagonal)
            .enumerate()
            .map(|(i, (r, d))| d * values[i] + r.iter().map(|&(j, w)| w * values[j]).sum::<f64>())
            .collect()
    }

    pub fn apply_points(&self, points: &[Point3<f64>]) -> Vec<Vector3<f64>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.iter().fold(Vector3::zeros(), |acc, &(j, w)| {
                    acc + (points[j] - points[i]) * w
                })
            })
            .collect()
    }

    pub fn apply_vectors(&self, values: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.iter().fold(Vector3::zeros(), |acc, &(j, w)| {
                    acc + (values[j] - values[i]) * w
                })
            })
            .collect()
    }
}

/// Cotangent of the angle at `apex` in the triangle (apex, a, b).
fn cot_at(apex: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let u = a - apex;
    let v = b - apex;
    u.dot(&v) / u.cross(&v).norm()
}
