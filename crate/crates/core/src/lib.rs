//! Cage-based 3D shape deformation driven by mean value coordinates.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: triangle meshes, point sets, OBJ/CSV I/O, surface sampling,
//!   PCA frames, cotangent Laplacians, nearest-neighbour queries and template cages.
//! - [`mvc`]: mean value coordinates of points with respect to a closed cage and
//!   the cage-driven deformation `p' = Σ φ_j(p) v'_j`.
//! - [`diff`]: a reverse-mode tape and the exact derivatives of the deformation
//!   with respect to both the deformed cage and the source cage.
//! - [`losses`]: alignment, coordinate-penalty, shape-preservation, consistency and
//!   cage-regularisation objectives together with the evaluation metrics.
//! - [`optim`]: Adam and the per-pair, cage-fitting and transfer pipelines.
//! - [`toy`]: a small offset predictor trained end to end through the cage layer.

// Negated comparisons are used to reject NaN alongside out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diff;
pub mod geometry;
pub mod losses;
pub mod mvc;
pub mod optim;
pub mod toy;

mod error;

pub use error::{Error, Result};
pub use geometry::{Cage, PointSet, TriMesh};
pub use mvc::{compute_mvc, deform, MvcConfig, MvcMatrix};

pub use nalgebra::{Point3, Vector3};
