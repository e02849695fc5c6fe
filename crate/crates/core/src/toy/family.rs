use nalgebra::{Point3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{
    enclosing_cage, make_template_cage, Cage, GeometryError, TemplateKind, TriMesh,
};

/// Range of each axis scale.
pub const SCALE_RANGE: (f64, f64) = (0.5, 1.5);

/// Clearance factor of [`SyntheticFamily::cage`] over the farthest source vertex.
pub const CAGE_MARGIN: f64 = 1.1;

/// Canonical source shape and its axis-scaled variants `diag(s) · v`.
///
/// Every member shares the source's connectivity, so vertices correspond
/// index by index; the descriptor of a member is `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFamily {
    pub source: TriMesh,
    /// When set, the family has a single member with this descriptor.
    pub fixed: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyShape {
    /// 42-vertex ellipsoid.
    #[default]
    Ellipsoid,
    /// Axis-aligned box, two triangles per face, each face split at its centre.
    Box,
}

impl SyntheticFamily {
    /// Canonical member of half-size 0.5 centred at the origin.
    pub fn new(shape: FamilyShape) -> Self {
        let source = match shape {
            FamilyShape::Ellipsoid => make_template_cage(
                TemplateKind::Sphere42,
                Point3::origin(),
                Vector3::repeat(0.5),
            )
            .expect("valid template")
            .into_mesh(),
            FamilyShape::Box => centred_box(0.5),
        };
        Self {
            source,
            fixed: None,
        }
    }

    pub fn from_mesh(source: TriMesh) -> Self {
        Self {
            source,
            fixed: None,
        }
    }

    /// The single-member variant.
    pub fn single(mut self, descriptor: [f64; 3]) -> Self {
        self.fixed = Some(descriptor);
        self
    }

    /// Static 42-vertex cage strictly enclosing the source.
    pub fn cage(&self) -> Result<Cage, GeometryError> {
        enclosing_cage(&self.source, TemplateKind::Sphere42, CAGE_MARGIN)
    }

    pub fn descriptor_len(&self) -> usize {
        3
    }

    pub fn member(&self, descriptor: &[f64; 3]) -> TriMesh {
        let s = Vector3::from(*descriptor);
        TriMesh {
            vertices: self
                .source
                .vertices
                .iter()
                .map(|p| Point3::from(p.coords.component_mul(&s)))
                .collect(),
            faces: self.source.faces.clone(),
        }
    }

    /// `n` descriptors drawn uniformly from the scale cube (or the fixed one).
    pub fn sample_descriptors(&self, n: usize, rng: &mut impl Rng) -> Vec<[f64; 3]> {
        (0..n)
            .map(|_| match self.fixed {
                Some(d) => d,
                None => [0, 1, 2].map(|_| rng.gen_range(SCALE_RANGE.0..=SCALE_RANGE.1)),
            })
            .collect()
    }
}

fn centred_box(h: f64) -> TriMesh {
    let corners: Vec<Point3<f64>> = (0..8)
        .map(|i| {
            Point3::new(
                if i & 1 == 0 { -h } else { h },
                if i & 2 == 0 { -h } else { h },
                if i & 4 == 0 { -h } else { h },
            )
        })
        .collect();
    // Outward-facing quads as corner indices, counter-clockwise seen from outside.
    let quads = [
        [0, 2, 3, 1],
        [4, 5, 7, 6],
        [0, 1, 5, 4],
        [2, 6, 7, 3],
        [0, 4, 6, 2],
        [1, 3, 7, 5],
    ];
    let mut vertices = corners.clone();
    let mut faces = Vec::new();
    for q in quads {
        let c = vertices.len();
        let centre = q
            .iter()
            .fold(Vector3::zeros(), |a, &i| a + corners[i].coords)
            / 4.0;
        vertices.push(Point3::from(centre));
        for k in 0..4 {
            faces.push([q[k], q[(k + 1) % 4], c]);
        }
    }
    TriMesh::new(vertices, faces).expect("valid box")
}
