use nalgebra::{Matrix3, Point3, Vector3};
use rand::Rng;

/// Vertex positions and outward-oriented triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point3<f64>>,
    pub faces: Vec<[usize; 3]>,
}

impl Mesh {
    pub fn bbox(&self) -> (Point3<f64>, Point3<f64>) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    pub fn transformed(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> Self {
        Self {
            vertices: self.vertices.iter().map(f).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Scaled uniformly and translated so the bounding box has unit max side
    /// and is centred at the origin.
    pub fn unit_box(&self) -> Self {
        let (lo, hi) = self.bbox();
        let side = (hi - lo).max();
        let c = Point3::from((lo.coords + hi.coords) / 2.0);
        self.transformed(|p| Point3::from((p - c) / side))
    }

    /// Wavefront OBJ text with 1-based indices.
    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            s += &format!("v {:?} {:?} {:?}\n", v.x, v.y, v.z);
        }
        for f in &self.faces {
            s += &format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1);
        }
        s
    }
}

pub fn regular_tetrahedron() -> Mesh {
    Mesh {
        vertices: vec![
            Point3::new(1.0, 1.0, 1.0),
            Point3::new(1.0, -1.0, -1.0),
            Point3::new(-1.0, 1.0, -1.0),
            Point3::new(-1.0, -1.0, 1.0),
        ],
        faces: vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
    }
}

/// `[0,1]³` with 8 vertices and 12 triangles.
pub fn unit_cube() -> Mesh {
    let vertices = (0..8)
        .map(|i| Point3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
        .collect();
    let quads = [
        [0, 2, 3, 1],
        [4, 5, 7, 6],
        [0, 1, 5, 4],
        [2, 6, 7, 3],
        [0, 4, 6, 2],
        [1, 3, 7, 5],
    ];
    let faces = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    Mesh { vertices, faces }
}

/// Surface of `[0,1]³` with every side split into an `n × n` grid, vertices
/// welded along the edges.
pub fn grid_cube(n: usize) -> Mesh {
    let corner = |i: usize| [i & 1, (i >> 1) & 1, (i >> 2) & 1];
    let quads = [
        [0, 2, 3, 1],
        [4, 5, 7, 6],
        [0, 1, 5, 4],
        [2, 6, 7, 3],
        [0, 4, 6, 2],
        [1, 3, 7, 5],
    ];
    let mut index = std::collections::HashMap::new();
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for q in quads {
        let [a, b, _, d] = q.map(corner);
        // Integer lattice position of grid node (s, t) on this side.
        let node = |s: usize, t: usize| -> [usize; 3] {
            std::array::from_fn(|k| a[k] * n + s * b[k] + t * d[k] - (s + t) * a[k])
        };
        let mut id = |s: usize, t: usize| -> usize {
            let key = node(s, t);
            *index.entry(key).or_insert_with(|| {
                vertices.push(Point3::from(key.map(|c| c as f64 / n as f64)));
                vertices.len() - 1
            })
        };
        for s in 0..n {
            for t in 0..n {
                let (v00, v10, v11, v01) = (id(s, t), id(s + 1, t), id(s + 1, t + 1), id(s, t + 1));
                faces.push([v00, v10, v11]);
                faces.push([v00, v11, v01]);
            }
        }
    }
    Mesh { vertices, faces }
}

/// `n × n` grid of unit squares in the `z = 0` plane, two triangles each.
pub fn flat_grid(n: usize) -> Mesh {
    let idx = |i: usize, j: usize| i * (n + 1) + j;
    let mut vertices = Vec::new();
    for i in 0..=n {
        for j in 0..=n {
            vertices.push(Point3::new(j as f64, i as f64, 0.0));
        }
    }
    let mut faces = Vec::new();
    for i in 0..n {
        for j in 0..n {
            faces.push([idx(i, j), idx(i, j + 1), idx(i + 1, j + 1)]);
            faces.push([idx(i, j), idx(i + 1, j + 1), idx(i + 1, j)]);
        }
    }
    Mesh { vertices, faces }
}

/// Latitude-longitude sphere with `2 + (rings) · segments` vertices and radial
/// bumps `r = 1 + amp · sin(3θ) cos(2φ)`.
pub fn bumpy_sphere(rings: usize, segments: usize, amp: f64) -> Mesh {
    let mut vertices = vec![Point3::new(0.0, 0.0, 1.0)];
    for i in 1..=rings {
        let theta = std::f64::consts::PI * i as f64 / (rings + 1) as f64;
        for j in 0..segments {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / segments as f64;
            let r = 1.0 + amp * (3.0 * theta).sin() * (2.0 * phi).cos();
            vertices.push(Point3::new(
                r * theta.sin() * phi.cos(),
                r * theta.sin() * phi.sin(),
                r * theta.cos(),
            ));
        }
    }
    vertices.push(Point3::new(0.0, 0.0, -1.0));
    let south = vertices.len() - 1;
    let ring = |i: usize, j: usize| 1 + i * segments + j % segments;
    let mut faces = Vec::new();
    for j in 0..segments {
        faces.push([0, ring(0, j), ring(0, j + 1)]);
        faces.push([south, ring(rings - 1, j + 1), ring(rings - 1, j)]);
    }
    for i in 0..rings - 1 {
        for j in 0..segments {
            faces.push([ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)]);
            faces.push([ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)]);
        }
    }
    Mesh { vertices, faces }
}

/// Orientation-preserving affine image of `mesh` with a random linear part
/// close to the identity and a random translation.
pub fn affine_cage(mesh: &Mesh, rng: &mut impl Rng, distortion: f64) -> Mesh {
    let a = loop {
        let m =
            Matrix3::identity() + Matrix3::from_fn(|_, _| rng.gen_range(-distortion..distortion));
        if m.determinant() > 0.3 {
            break m;
        }
    };
    let t = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
    mesh.transformed(|p| Point3::from(a * p.coords + t))
}
