use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use super::GeometryError;

/// Faces below this area are rejected by [`TriMesh::new`].
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Indexed triangle mesh. Used for shapes as well as cages.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point3<f64>>,
    pub faces: Vec<[usize; 3]>,
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point3<f64>>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let (min, max) = it.fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
        Some(Self { min, max })
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn center(&self) -> Point3<f64> {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }
}

impl TriMesh {
    /// Builds a mesh, checking face indices and rejecting degenerate faces.
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self, GeometryError> {
        let mesh = Self { vertices, faces };
        mesh.validate()?;
        Ok(mesh)
    }

    /// A vertex-only mesh (point cloud stored as OBJ `v` records).
    pub fn from_points(vertices: Vec<Point3<f64>>) -> Self {
        Self {
            vertices,
            faces: Vec::new(),
        }
    }

    fn validate(&self) -> Result<(), GeometryError> {
        let n = self.vertices.len();
        for (fi, f) in self.faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&i| i >= n) {
                return Err(GeometryError::IndexOutOfRange {
                    face: fi,
                    index: bad as i64,
                    count: n,
                });
            }
            let area = self.face_area(fi);
            if !(area >= DEGENERATE_AREA) {
                return Err(GeometryError::DegenerateFace { face: fi, area });
            }
        }
        Ok(())
    }

    /// Same connectivity with new vertex positions. No geometric validation.
    pub fn with_vertices(&self, vertices: Vec<Point3<f64>>) -> Result<Self, GeometryError> {
        if vertices.len() != self.vertices.len() {
            return Err(GeometryError::Invalid(format!(
                "expected {} vertices, got {}",
                self.vertices.len(),
                vertices.len()
            )));
        }
        Ok(Self {
            vertices,
            faces: self.faces.clone(),
        })
    }

    pub fn face_normal_scaled(&self, face: usize) -> Vector3<f64> {
        let [a, b, c] = self.faces[face];
        let (a, b, c) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, face: usize) -> f64 {
        0.5 * self.face_normal_scaled(face).norm()
    }

    pub fn face_areas(&self) -> Vec<f64> {
        (0..self.faces.len()).map(|f| self.face_area(f)).collect()
    }

    pub fn total_area(&self) -> f64 {
        self.face_areas().iter().sum()
    }

    pub fn min_face_area(&self) -> f64 {
        self.face_areas().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn aabb(&self) -> Option<Aabb> {
        Aabb::from_points(&self.vertices)
    }

    /// Bounding-box diagonal length, 0 for an empty mesh.
    pub fn diameter(&self) -> f64 {
        self.aabb().map_or(0.0, |b| b.diagonal())
    }

    /// Signed volume enclosed by the surface (positive for outward-facing triangles).
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|&[a, b, c]| {
                let (a, b, c) = (
                    self.vertices[a].coords,
                    self.vertices[b].coords,
                    self.vertices[c].coords,
                );
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    /// Sorted one-ring neighbour lists.
    pub fn one_ring(&self) -> Vec<Vec<usize>> {
        let mut ring = vec![Vec::new(); self.vertices.len()];
        for &[a, b, c] in &self.faces {
            for (i, j) in [(a, b), (b, c), (c, a)] {
                ring[i].push(j);
                ring[j].push(i);
            }
        }
        for r in &mut ring {
            r.sort_unstable();
            r.dedup();
        }
        ring
    }

    /// Checks that every undirected edge is used exactly twice, once per direction.
    pub fn check_closed_oriented(&self) -> Result<(), GeometryError> {
        let mut directed: HashMap<(usize, usize), u32> = HashMap::new();
        for &[a, b, c] in &self.faces {
            for e in [(a, b), (b, c), (c, a)] {
                *directed.entry(e).or_default() += 1;
            }
        }
        // Sorted so the reported edge does not depend on hash order.
        let mut edges: Vec<_> = directed.iter().map(|(&e, &n)| (e, n)).collect();
        edges.sort_unstable();
        for ((a, b), n) in edges {
            let rev = directed.get(&(b, a)).copied().unwrap_or(0);
            if n + rev > 2 {
                return Err(GeometryError::NonManifoldEdge(a.min(b), a.max(b)));
            }
            if n > 1 {
                return Err(GeometryError::InconsistentOrientation(a, b));
            }
            if rev == 0 {
                return Err(GeometryError::OpenEdge(a.min(b), a.max(b)));
            }
        }
        Ok(())
    }
}

/// A closed, consistently oriented triangle mesh used to drive deformations.
#[derive(Debug, Clone, PartialEq)]
pub struct Cage {
    mesh: TriMesh,
}

impl Cage {
    pub fn new(mesh: TriMesh) -> Result<Self, GeometryError> {
        if mesh.faces.is_empty() {
            return Err(GeometryError::EmptyMesh);
        }
        mesh.check_closed_oriented()?;
        Ok(Self { mesh })
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn into_mesh(self) -> TriMesh {
        self.mesh
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.mesh.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.mesh.faces
    }

    pub fn len(&self) -> usize {
        self.mesh.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mesh.vertices.is_empty()
    }

    /// Moves the cage vertices, keeping the (already validated) connectivity.
    pub fn with_vertices(&self, vertices: Vec<Point3<f64>>) -> Result<Self, GeometryError> {
        Ok(Self {
            mesh: self.mesh.with_vertices(vertices)?,
        })
    }

    /// Vertices offset by per-vertex displacements.
    pub fn offset(&self, offsets: &[Vector3<f64>]) -> Result<Self, GeometryError> {
        if offsets.len() != self.len() {
            return Err(GeometryError::Invalid(format!(
                "expected {} offsets, got {}",
                self.len(),
                offsets.len()
            )));
        }
        let v = self
            .vertices()
            .iter()
            .zip(offsets)
            .map(|(p, d)| p + d)
            .collect();
        self.with_vertices(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetra() -> TriMesh {
        TriMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(0.0, 0.0, 1.0),
            ],
            vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn tetra_is_closed_and_outward() {
        let t = tetra();
        assert!(t.check_closed_oriented().is_ok());
        assert!((t.signed_volume() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(t.one_ring()[0], vec![1, 2, 3]);
    }

    #[test]
    fn open_and_flipped_cages_are_rejected() {
        let mut t = tetra();
        t.faces.pop();
        assert!(matches!(Cage::new(t), Err(GeometryError::OpenEdge(..))));

        let mut t = tetra();
        t.faces[3] = [1, 3, 2];
        assert!(matches!(
            Cage::new(t),
            Err(GeometryError::InconsistentOrientation(..))
        ));
    }

    #[test]
    fn degenerate_face_rejected() {
        let err = TriMesh::new(
            vec![
                Point3::origin(),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(2.0, 0.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap_err();
        assert!(matches!(err, GeometryError::DegenerateFace { face: 0, .. }));
    }
}
