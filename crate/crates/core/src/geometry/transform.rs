use nalgebra::{Point3, Vector3};

use super::{GeometryError, PointSet, TriMesh};

/// Uniform scale followed by a translation: `p ↦ scale · p + translation`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Similarity {
    pub scale: f64,
    pub translation: Vector3<f64>,
}

impl Similarity {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(p.coords * self.scale + self.translation)
    }

    pub fn apply_mesh(&self, mesh: &TriMesh) -> TriMesh {
        TriMesh {
            vertices: mesh.vertices.iter().map(|p| self.apply(p)).collect(),
            faces: mesh.faces.clone(),
        }
    }

    pub fn inverse(&self) -> Self {
        Self {
            scale: 1.0 / self.scale,
            translation: -self.translation / self.scale,
        }
    }
}

/// Centres the bounding box at the origin and scales its longest side to 1.
pub fn normalize_to_unit_box(mesh: &TriMesh) -> Result<(TriMesh, Similarity), GeometryError> {
    let bb = mesh.aabb().ok_or(GeometryError::EmptyMesh)?;
    let side = bb.extent().max();
    if !(side > 0.0) {
        return Err(GeometryError::Invalid("mesh has zero extent".into()));
    }
    let scale = 1.0 / side;
    let t = Similarity {
        scale,
        translation: -bb.center().coords * scale,
    };
    Ok((t.apply_mesh(mesh), t))
}

pub fn reflect_x_points(points: &[Point3<f64>]) -> Vec<Point3<f64>> {
    points.iter().map(|p| Point3::new(-p.x, p.y, p.z)).collect()
}

/// Mirror through the `x = 0` plane. Derived quantities are dropped.
pub fn reflect_x(points: &PointSet) -> PointSet {
    PointSet::new(reflect_x_points(&points.points))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cuboid(sx: f64, sy: f64, sz: f64, origin: [f64; 3]) -> TriMesh {
        let v = (0..8)
            .map(|i| {
                Point3::new(
                    origin[0] + sx * (i & 1) as f64,
                    origin[1] + sy * ((i >> 1) & 1) as f64,
                    origin[2] + sz * ((i >> 2) & 1) as f64,
                )
            })
            .collect();
        TriMesh::from_points(v)
    }

    #[test]
    fn cube_to_unit_box() {
        let (m, t) = normalize_to_unit_box(&cuboid(2.0, 2.0, 2.0, [0.0; 3])).unwrap();
        assert_eq!(t.scale, 0.5);
        let bb = m.aabb().unwrap();
        assert_eq!(bb.min, Point3::new(-0.5, -0.5, -0.5));
        assert_eq!(bb.max, Point3::new(0.5, 0.5, 0.5));
    }

    #[test]
    fn anisotropy_preserved_and_idempotent() {
        let (m, _) = normalize_to_unit_box(&cuboid(4.0, 2.0, 1.0, [3.0, -1.0, 7.0])).unwrap();
        let e = m.aabb().unwrap().extent();
        assert!((e - Vector3::new(1.0, 0.5, 0.25)).norm() < 1e-15);
        let (m2, t2) = normalize_to_unit_box(&m).unwrap();
        assert!((t2.scale - 1.0).abs() < 1e-12 && t2.translation.norm() < 1e-12);
        for (a, b) in m.vertices.iter().zip(&m2.vertices) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(normalize_to_unit_box(&TriMesh::from_points(vec![])).is_err());
    }

    #[test]
    fn inverse_round_trip() {
        let t = Similarity {
            scale: 0.25,
            translation: Vector3::new(1.0, -2.0, 0.5),
        };
        let p = Point3::new(0.3, 0.7, -1.1);
        assert!((t.inverse().apply(&t.apply(&p)) - p).norm() < 1e-15);
    }

    #[test]
    fn reflection() {
        let r = reflect_x_points(&[Point3::new(1.0, 2.0, 3.0), Point3::new(0.0, 5.0, 5.0)]);
        assert_eq!(
            r,
            vec![Point3::new(-1.0, 2.0, 3.0), Point3::new(0.0, 5.0, 5.0)]
        );
        assert_eq!(
            reflect_x_points(&r),
            vec![Point3::new(1.0, 2.0, 3.0), Point3::new(0.0, 5.0, 5.0)]
        );
    }
}
