use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use super::{Cage, GeometryError, TriMesh};

/// Subdivided icosahedra used as initial cages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateKind {
    /// One subdivision: 42 vertices, 80 faces.
    Sphere42,
    /// Two subdivisions: 162 vertices, 320 faces.
    Sphere162,
}

impl TemplateKind {
    fn subdivisions(self) -> usize {
        match self {
            TemplateKind::Sphere42 => 1,
            TemplateKind::Sphere162 => 2,
        }
    }
}

impl std::str::FromStr for TemplateKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sphere42" => Ok(Self::Sphere42),
            "sphere162" => Ok(Self::Sphere162),
            _ => Err(format!(
                "unknown cage template `{s}` (expected sphere42 or sphere162)"
            )),
        }
    }
}

/// Unit icosphere, scaled per axis by `scale` and moved to `center`.
pub fn make_template_cage(
    kind: TemplateKind,
    center: Point3<f64>,
    scale: Vector3<f64>,
) -> Result<Cage, GeometryError> {
    if !scale.iter().all(|&s| s > 0.0 && s.is_finite()) {
        return Err(GeometryError::InvalidScale([scale.x, scale.y, scale.z]));
    }
    let (mut vertices, mut faces) = icosahedron();
    for _ in 0..kind.subdivisions() {
        faces = subdivide(&mut vertices, &faces);
    }
    let vertices = vertices
        .into_iter()
        .map(|v| center + v.normalize().component_mul(&scale))
        .collect();
    Cage::new(TriMesh::new(vertices, faces)?)
}

/// Uniformly scaled template centred at the bounding-box centre of `mesh`, whose
/// face planes all lie at least `margin` times the farthest vertex distance away
/// from the centre, so the cage strictly encloses the mesh.
pub fn enclosing_cage(
    mesh: &TriMesh,
    kind: TemplateKind,
    margin: f64,
) -> Result<Cage, GeometryError> {
    let center = mesh.aabb().ok_or(GeometryError::EmptyMesh)?.center();
    let reach = mesh
        .vertices
        .iter()
        .map(|v| (v - center).norm())
        .fold(0.0, f64::max);
    let unit = make_template_cage(kind, Point3::origin(), Vector3::repeat(1.0))?;
    let inradius = unit
        .faces()
        .iter()
        .map(|f| {
            let [a, b, c] = f.map(|k| unit.vertices()[k]);
            (b - a).cross(&(c - a)).normalize().dot(&a.coords).abs()
        })
        .fold(f64::INFINITY, f64::min);
    let r = margin * reach / inradius;
    make_template_cage(kind, center, Vector3::repeat(r))
}

pub(crate) fn icosahedron() -> (Vec<Vector3<f64>>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let v = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (
        v.iter().map(|c| Vector3::from(*c).normalize()).collect(),
        faces,
    )
}

/// 1-to-4 split with shared edge midpoints projected back to the unit sphere.
fn subdivide(vertices: &mut Vec<Vector3<f64>>, faces: &[[usize; 3]]) -> Vec<[usize; 3]> {
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut mid = |a: usize, b: usize, vertices: &mut Vec<Vector3<f64>>| {
        *midpoint.entry((a.min(b), a.max(b))).or_insert_with(|| {
            vertices.push(((vertices[a] + vertices[b]) * 0.5).normalize());
            vertices.len() - 1
        })
    };
    let mut out = Vec::with_capacity(faces.len() * 4);
    for &[a, b, c] in faces {
        let ab = mid(a, b, vertices);
        let bc = mid(b, c, vertices);
        let ca = mid(c, a, vertices);
        out.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_radius() {
        let c = make_template_cage(
            TemplateKind::Sphere42,
            Point3::origin(),
            Vector3::repeat(1.0),
        )
        .unwrap();
        assert_eq!((c.len(), c.faces().len()), (42, 80));
        assert!(c
            .vertices()
            .iter()
            .all(|v| (v.coords.norm() - 1.0).abs() < 1e-9));
        assert!(c.mesh().signed_volume() > 0.0);

        let c = make_template_cage(
            TemplateKind::Sphere162,
            Point3::origin(),
            Vector3::repeat(1.0),
        )
        .unwrap();
        assert_eq!((c.len(), c.faces().len()), (162, 320));
    }

    #[test]
    fn anisotropic_scale_and_center() {
        let c = make_template_cage(
            TemplateKind::Sphere42,
            Point3::new(1.0, 2.0, 3.0),
            Vector3::new(2.0, 1.0, 1.0),
        )
        .unwrap();
        let bb = c.mesh().aabb().unwrap();
        assert!((bb.extent() - Vector3::new(4.0, 2.0, 2.0)).norm() < 1e-12);
        assert!((bb.center() - Point3::new(1.0, 2.0, 3.0)).norm() < 1e-12);
        assert!(make_template_cage(
            TemplateKind::Sphere42,
            Point3::origin(),
            Vector3::new(1.0, 0.0, 1.0)
        )
        .is_err());
    }

    #[test]
    fn enclosing_cage_contains_box_corners() {
        let corners: Vec<Point3<f64>> = (0..8)
            .map(|k| {
                Point3::new(
                    (k & 1) as f64,
                    ((k >> 1) & 1) as f64 * 2.0,
                    (k >> 2) as f64 * 0.5,
                )
            })
            .collect();
        let mesh = TriMesh::from_points(corners.clone());
        let cage = enclosing_cage(&mesh, TemplateKind::Sphere42, 1.1).unwrap();
        for f in cage.faces() {
            let [a, b, c] = f.map(|k| cage.vertices()[k]);
            let n = (b - a).cross(&(c - a)).normalize();
            for p in &corners {
                assert!(n.dot(&(p - a)) < 0.0);
            }
        }
    }
}
