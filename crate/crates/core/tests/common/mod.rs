#![allow(dead_code)]

use cagewarp::{Cage, Point3, TriMesh};
use cagewarp_testkit::Mesh;
use rand::Rng;

pub fn tri(m: &Mesh) -> TriMesh {
    TriMesh::new(m.vertices.clone(), m.faces.clone()).expect("valid fixture")
}

pub fn cage(m: &Mesh) -> Cage {
    Cage::new(tri(m)).expect("closed fixture")
}

pub fn mesh(t: &TriMesh) -> Mesh {
    Mesh {
        vertices: t.vertices.clone(),
        faces: t.faces.clone(),
    }
}

/// Random convex combination of the vertices: inside any convex cage.
pub fn convex_point(vertices: &[Point3<f64>], rng: &mut impl Rng) -> Point3<f64> {
    let w: Vec<f64> = vertices.iter().map(|_| rng.gen::<f64>().powi(2)).collect();
    let s: f64 = w.iter().sum();
    Point3::from(
        vertices
            .iter()
            .zip(&w)
            .fold(nalgebra::Vector3::zeros(), |a, (v, w)| {
                a + v.coords * (w / s)
            }),
    )
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
