//! Meshes, point sets and the local differential quantities built on them.

mod laplacian;
mod mesh;
mod obj;
mod pointset;
mod sampling;
mod spatial;
pub(crate) mod template;
mod transform;

pub use laplacian::CotLaplacian;
pub use mesh::{Aabb, Cage, TriMesh, DEGENERATE_AREA};
pub use obj::{
    load_mesh, load_points, parse_obj, parse_points_csv, save_mesh, save_points_csv, write_obj,
    ObjOptions,
};
pub(crate) use pointset::PcaJet;
pub use pointset::{orient_normal, pca_frame, PcaFrame, PointSet, DEFAULT_KNN};
pub use sampling::{sample_surface, sample_surface_with_faces};
pub use spatial::KdTree;
pub use template::{enclosing_cage, make_template_cage, TemplateKind};
pub use transform::{normalize_to_unit_box, reflect_x, reflect_x_points, Similarity};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("face {face} references vertex {index}, but the mesh has {count} vertices")]
    IndexOutOfRange {
        face: usize,
        index: i64,
        count: usize,
    },
    #[error("line {line}: face has {arity} vertices and triangulation is disabled")]
    NonTriangle { line: usize, arity: usize },
    #[error("face {face} is degenerate (area {area:e})")]
    DegenerateFace { face: usize, area: f64 },
    #[error("mesh is empty")]
    EmptyMesh,
    #[error("mesh has zero total surface area")]
    ZeroArea,
    #[error("edge ({0}, {1}) is not shared by exactly two faces")]
    OpenEdge(usize, usize),
    #[error("edge ({0}, {1}) appears twice with the same direction")]
    InconsistentOrientation(usize, usize),
    #[error("edge ({0}, {1}) has more than two incident faces")]
    NonManifoldEdge(usize, usize),
    #[error("point {index} has {count} neighbours, at least 3 are required")]
    TooFewNeighbors { index: usize, count: usize },
    #[error("point set has no neighbourhoods")]
    MissingNeighborhoods,
    #[error("point set has no PCA frames")]
    MissingFrames,
    #[error("scale components must be strictly positive, got {0:?}")]
    InvalidScale([f64; 3]),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
