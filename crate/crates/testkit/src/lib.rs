//! Independent oracles and fixtures for the cagewarp test suites.
//!
//! Nothing here depends on the library under test: meshes are plain vertex and
//! face lists, and every oracle is written from its textbook definition.

pub mod fixtures;
pub mod oracles;

pub use fixtures::{
    affine_cage, bumpy_sphere, flat_grid, grid_cube, regular_tetrahedron, unit_cube, Mesh,
};
pub use oracles::{
    brute_cage_laplacian_loss, brute_chamfer, brute_cot_laplacian, brute_mvc_consistency,
    brute_mvc_penalty, brute_pca_plane, edges_paired, jacobi_eigen, mc_mvc, nearest_brute,
};
