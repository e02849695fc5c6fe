use nalgebra::Point3;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GeometryError, PointSet, TriMesh};

/// Draws `n` area-uniform surface points. Deterministic for a fixed seed and face order.
pub fn sample_surface(mesh: &TriMesh, n: usize, seed: u64) -> Result<PointSet, GeometryError> {
    sample_surface_with_faces(mesh, n, seed).map(|(p, _)| p)
}

/// Like [`sample_surface`], also returning the face each sample was drawn from.
pub fn sample_surface_with_faces(
    mesh: &TriMesh,
    n: usize,
    seed: u64,
) -> Result<(PointSet, Vec<usize>), GeometryError> {
    let areas = mesh.face_areas();
    let total: f64 = areas.iter().sum();
    if !(total > 0.0) {
        return Err(GeometryError::ZeroArea);
    }
    let faces = WeightedIndex::new(&areas).map_err(|_| GeometryError::ZeroArea)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut ids = Vec::with_capacity(n);
    for _ in 0..n {
        let f = faces.sample(&mut rng);
        let [a, b, c] = mesh.faces[f];
        let r1: f64 = rng.gen();
        let r2: f64 = rng.gen();
        let s = r1.sqrt();
        let (wa, wb, wc) = (1.0 - s, s * (1.0 - r2), s * r2);
        let p = mesh.vertices[a].coords * wa
            + mesh.vertices[b].coords * wb
            + mesh.vertices[c].coords * wc;
        points.push(Point3::from(p));
        ids.push(f);
    }
    Ok((PointSet::new(points), ids))
}
