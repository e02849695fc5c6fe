use nalgebra::{Matrix3, Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fixtures::Mesh;

/// Mean value coordinates as the Monte-Carlo estimate of their defining
/// integral: for uniformly random directions ω, every intersection of the ray
/// `p + tω` with a cage triangle contributes `±b_j / t`, with `b_j` the
/// barycentric coordinate of the hit and the sign given by the side of the
/// triangle the ray crosses. The sums are normalised at the end.
pub fn mc_mvc(cage: &Mesh, p: &Point3<f64>, n_rays: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = vec![0.0; cage.vertices.len()];
    for _ in 0..n_rays {
        // Uniform direction: z uniform in [-1, 1], azimuth uniform.
        let z: f64 = rng.gen_range(-1.0..1.0);
        let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let r = (1.0 - z * z).sqrt();
        let dir = Vector3::new(r * a.cos(), r * a.sin(), z);
        for f in &cage.faces {
            let [v0, v1, v2] = f.map(|i| cage.vertices[i]);
            if let Some((t, b1, b2)) = ray_triangle(p, &dir, &v0, &v1, &v2) {
                let n = (v1 - v0).cross(&(v2 - v0));
                let sign = if n.dot(&dir) > 0.0 { 1.0 } else { -1.0 };
                acc[f[0]] += sign * (1.0 - b1 - b2) / t;
                acc[f[1]] += sign * b1 / t;
                acc[f[2]] += sign * b2 / t;
            }
        }
    }
    let total: f64 = acc.iter().sum();
    acc.iter().map(|w| w / total).collect()
}

/// Möller–Trumbore; returns `(t, b1, b2)` for a hit at `t > 0`.
fn ray_triangle(
    o: &Point3<f64>,
    d: &Vector3<f64>,
    v0: &Point3<f64>,
    v1: &Point3<f64>,
    v2: &Point3<f64>,
) -> Option<(f64, f64, f64)> {
    let e1 = v1 - v0;
    let e2 = v2 - v0;
    let h = d.cross(&e2);
    let det = e1.dot(&h);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - v0;
    let b1 = s.dot(&h) * inv;
    if !(0.0..=1.0).contains(&b1) {
        return None;
    }
    let q = s.cross(&e1);
    let b2 = d.dot(&q) * inv;
    if b2 < 0.0 || b1 + b2 > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > 0.0).then_some((t, b1, b2))
}

/// Index and squared distance of the nearest point by linear scan; ties go to
/// the smaller index.
pub fn nearest_brute(q: &Point3<f64>, points: &[Point3<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, p) in points.iter().enumerate() {
        let d = (p - q).norm_squared();
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Symmetric chamfer distance by O(n·m) scans.
pub fn brute_chamfer(a: &[Point3<f64>], b: &[Point3<f64>]) -> f64 {
    let one = |x: &[Point3<f64>], y: &[Point3<f64>]| {
        x.iter().map(|p| nearest_brute(p, y).1).sum::<f64>() / x.len() as f64
    };
    one(a, b) + one(b, a)
}

/// `(1 / (rows · cols)) Σ min(φ, 0)²` by double loop over a row-major matrix.
pub fn brute_mvc_penalty(weights: &[f64], rows: usize, cols: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            let w = weights[i * cols + j];
            if w < 0.0 {
                s += w * w;
            }
        }
    }
    s / (rows * cols) as f64
}

/// `Σ_j Σ_k (a_kj - b_kj)²` by double loop.
pub fn brute_mvc_consistency(a: &[f64], b: &[f64], rows: usize, cols: usize) -> f64 {
    let mut s = 0.0;
    for j in 0..cols {
        for k in 0..rows {
            let d = a[k * cols + j] - b[k * cols + j];
            s += d * d;
        }
    }
    s
}

/// Dense cotangent Laplacian from per-corner angles: every triangle adds
/// `cot(angle at k) / 2` to the weight of its opposite edge `(i, j)`, and the
/// diagonal is the negated row sum.
pub fn brute_cot_laplacian(mesh: &Mesh) -> Vec<Vec<f64>> {
    let n = mesh.vertices.len();
    let mut l = vec![vec![0.0; n]; n];
    for f in &mesh.faces {
        for k in 0..3 {
            let (i, j, o) = (f[(k + 1) % 3], f[(k + 2) % 3], f[k]);
            let u = mesh.vertices[i] - mesh.vertices[o];
            let v = mesh.vertices[j] - mesh.vertices[o];
            let angle = (u.dot(&v) / (u.norm() * v.norm())).clamp(-1.0, 1.0).acos();
            let w = 0.5 / angle.tan();
            l[i][j] += w;
            l[j][i] += w;
        }
    }
    for (i, row) in l.iter_mut().enumerate() {
        let s: f64 = row
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, w)| w)
            .sum();
        row[i] = -s;
    }
    l
}

/// `Σ_j (‖(L v)_j‖ - ‖(L v')_j‖)²` with the dense Laplacian of `before`.
pub fn brute_cage_laplacian_loss(before: &Mesh, after: &[Point3<f64>]) -> f64 {
    let l = brute_cot_laplacian(before);
    let apply = |v: &[Point3<f64>], i: usize| {
        let mut acc = Vector3::zeros();
        for (j, p) in v.iter().enumerate() {
            acc += p.coords * l[i][j];
        }
        acc
    };
    (0..l.len())
        .map(|i| (apply(&before.vertices, i).norm() - apply(after, i).norm()).powi(2))
        .sum()
}

/// Least-squares plane through `neighbors` by Jacobi eigen-decomposition of
/// the covariance: `(unit normal up to sign, |normal · (p - centroid)|)`.
pub fn brute_pca_plane(p: &Point3<f64>, neighbors: &[Point3<f64>]) -> (Vector3<f64>, f64) {
    let m = neighbors.len() as f64;
    let c = neighbors.iter().fold(Vector3::zeros(), |a, q| a + q.coords) / m;
    let mut cov = Matrix3::zeros();
    for q in neighbors {
        let r = q.coords - c;
        cov += r * r.transpose() / m;
    }
    let (_, vecs) = jacobi_eigen(&cov);
    let n = vecs.column(0).into_owned();
    (n, n.dot(&(p.coords - c)).abs())
}

/// Every undirected edge appears exactly twice, once per direction.
pub fn edges_paired(mesh: &Mesh) -> bool {
    let mut directed = std::collections::HashMap::new();
    for f in &mesh.faces {
        for k in 0..3 {
            *directed.entry((f[k], f[(k + 1) % 3])).or_insert(0) += 1;
        }
    }
    directed
        .iter()
        .all(|(&(a, b), &n)| n == 1 && directed.get(&(b, a)) == Some(&1))
}

/// Cyclic Jacobi eigen-decomposition of a symmetric 3×3 matrix: eigenvalues in
/// ascending order and the matching unit eigenvectors as columns.
pub fn jacobi_eigen(m: &Matrix3<f64>) -> ([f64; 3], Matrix3<f64>) {
    let mut a = *m;
    let mut v = Matrix3::identity();
    for _ in 0..100 {
        let off = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
        if off < 1e-30 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[(p, q)].abs() < 1e-300 {
                continue;
            }
            let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut r = Matrix3::identity();
            r[(p, p)] = c;
            r[(q, q)] = c;
            r[(p, q)] = s;
            r[(q, p)] = -s;
            a = r.transpose() * a * r;
            v *= r;
        }
    }
    let mut order = [0, 1, 2];
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.map(|i| a[(i, i)]);
    let vectors = Matrix3::from_columns(&order.map(|i| v.column(i).into_owned()));
    (values, vectors)
}
