use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};

use super::{GeometryError, KdTree, TriMesh};

/// Neighbourhood size used for bare point clouds (meshes use their one-ring).
pub const DEFAULT_KNN: usize = 8;

/// Below this ratio of middle to largest covariance eigenvalue the neighbourhood
/// is treated as collinear.
const COLLINEAR_RATIO: f64 = 1e-10;
const SIGN_TOL: f64 = 1e-12;

/// Least-squares plane through a neighbourhood, seen from one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcaFrame {
    /// Unit normal of the plane, sign fixed by [`orient_normal`].
    pub normal: Vector3<f64>,
    /// Mean of the neighbourhood points.
    pub centroid: Point3<f64>,
    /// `|normal · (p - centroid)|`.
    pub offset: f64,
    /// Neighbourhood was collinear; the normal is an arbitrary (deterministic)
    /// direction orthogonal to the line.
    pub degenerate: bool,
}

/// Surface samples with optional neighbourhoods and PCA frames.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointSet {
    pub points: Vec<Point3<f64>>,
    neighborhoods: Option<Vec<Vec<usize>>>,
    frames: Option<Vec<PcaFrame>>,
}

impl PointSet {
    pub fn new(points: Vec<Point3<f64>>) -> Self {
        Self {
            points,
            neighborhoods: None,
            frames: None,
        }
    }

    /// Mesh vertices with their one-ring neighbourhoods.
    pub fn from_mesh(mesh: &TriMesh) -> Self {
        Self {
            points: mesh.vertices.clone(),
            neighborhoods: Some(mesh.one_ring()),
            frames: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn neighborhoods(&self) -> Option<&[Vec<usize>]> {
        self.neighborhoods.as_deref()
    }

    pub fn frames(&self) -> Option<&[PcaFrame]> {
        self.frames.as_deref()
    }

    pub fn pca_normals(&self) -> Option<Vec<Vector3<f64>>> {
        self.frames().map(|f| f.iter().map(|f| f.normal).collect())
    }

    pub fn pca_offsets(&self) -> Option<Vec<f64>> {
        self.frames().map(|f| f.iter().map(|f| f.offset).collect())
    }

    pub fn with_neighborhoods(
        mut self,
        neighborhoods: Vec<Vec<usize>>,
    ) -> Result<Self, GeometryError> {
        if neighborhoods.len() != self.points.len() {
            return Err(GeometryError::Invalid(format!(
                "{} neighbourhoods for {} points",
                neighborhoods.len(),
                self.points.len()
            )));
        }
        if let Some(&bad) = neighborhoods
            .iter()
            .flatten()
            .find(|&&j| j >= self.points.len())
        {
            return Err(GeometryError::Invalid(format!(
                "neighbour index {bad} out of range"
            )));
        }
        self.neighborhoods = Some(neighborhoods);
        self.frames = None;
        Ok(self)
    }

    /// k nearest neighbours of every point, excluding the point itself.
    pub fn with_knn(self, k: usize) -> Self {
        let tree = KdTree::build(&self.points);
        let nb = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                tree.k_nearest(p, k + 1)
                    .into_iter()
                    .map(|(j, _)| j)
                    .filter(|&j| j != i)
                    .take(k)
                    .collect()
            })
            .collect();
        Self {
            neighborhoods: Some(nb),
            frames: None,
            ..self
        }
    }

    /// Falls back to k-NN with [`DEFAULT_KNN`] when no neighbourhoods are present.
    pub fn ensure_neighborhoods(self) -> Self {
        if self.neighborhoods.is_some() {
            self
        } else {
            self.with_knn(DEFAULT_KNN)
        }
    }

    pub fn compute_pca_frame(&self, i: usize) -> Result<PcaFrame, GeometryError> {
        let nb = self
            .neighborhoods
            .as_ref()
            .ok_or(GeometryError::MissingNeighborhoods)?;
        frame_at(&self.points, &nb[i], i, &self.points[i])
    }

    /// Computes and stores the PCA frame of every point.
    pub fn with_pca(mut self) -> Result<Self, GeometryError> {
        let nb = self
            .neighborhoods
            .as_ref()
            .ok_or(GeometryError::MissingNeighborhoods)?;
        let frames = (0..self.points.len())
            .map(|i| frame_at(&self.points, &nb[i], i, &self.points[i]))
            .collect::<Result<Vec<_>, _>>()?;
        self.frames = Some(frames);
        Ok(self)
    }

    /// Moved copy sharing this set's neighbourhoods, without frames.
    pub fn with_points(&self, points: Vec<Point3<f64>>) -> Result<Self, GeometryError> {
        if points.len() != self.points.len() {
            return Err(GeometryError::Invalid(format!(
                "expected {} points, got {}",
                self.points.len(),
                points.len()
            )));
        }
        Ok(Self {
            points,
            neighborhoods: self.neighborhoods.clone(),
            frames: None,
        })
    }
}

fn frame_at(
    points: &[Point3<f64>],
    nb: &[usize],
    index: usize,
    p: &Point3<f64>,
) -> Result<PcaFrame, GeometryError> {
    if nb.len() < 3 {
        return Err(GeometryError::TooFewNeighbors {
            index,
            count: nb.len(),
        });
    }
    Ok(PcaJet::new(p, nb.iter().map(|&j| points[j])).frame)
}

/// PCA frame of `p` with respect to `neighbors`.
pub fn pca_frame(p: &Point3<f64>, neighbors: &[Point3<f64>]) -> Result<PcaFrame, GeometryError> {
    if neighbors.len() < 3 {
        return Err(GeometryError::TooFewNeighbors {
            index: 0,
            count: neighbors.len(),
        });
    }
    Ok(PcaJet::new(p, neighbors.iter().copied()).frame)
}

/// Sign convention: `n_z ≥ 0`; on a tie `n_y ≥ 0`, then `n_x ≥ 0`.
pub fn orient_normal(n: Vector3<f64>) -> Vector3<f64> {
    for c in [n.z, n.y, n.x] {
        if c > SIGN_TOL {
            return n;
        }
        if c < -SIGN_TOL {
            return -n;
        }
    }
    n
}

/// A PCA frame together with the eigen-system needed to differentiate it.
#[derive(Debug, Clone)]
pub(crate) struct PcaJet {
    pub frame: PcaFrame,
    /// Eigenvalues of the (1/m-normalised) covariance, ascending.
    pub eigenvalues: [f64; 3],
    /// Matching unit eigenvectors.
    pub eigenvectors: [Vector3<f64>; 3],
    /// `+1` or `-1`: `frame.normal = sign · eigenvectors[0]`.
    pub sign: f64,
    /// Signed distance `normal · (p - centroid)`.
    pub signed_offset: f64,
}

impl PcaJet {
    pub fn new(p: &Point3<f64>, neighbors: impl Iterator<Item = Point3<f64>> + Clone) -> Self {
        let m = neighbors.clone().count() as f64;
        let centroid = Point3::from(
            neighbors
                .clone()
                .fold(Vector3::zeros(), |acc, q| acc + q.coords)
                / m,
        );
        let cov = neighbors.fold(Matrix3::zeros(), |acc, q| {
            let r = q - centroid;
            acc + r * r.transpose()
        }) / m;

        let eig = SymmetricEigen::new(cov);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = order.map(|k| eig.eigenvalues[k]);
        let eigenvectors = order.map(|k| eig.eigenvectors.column(k).into_owned());

        let degenerate = eigenvalues[1] <= COLLINEAR_RATIO * eigenvalues[2].max(f64::MIN_POSITIVE);
        let raw = if degenerate {
            let line = eigenvectors[2];
            let abs = line.abs();
            let axis = if abs.x <= abs.y && abs.x <= abs.z {
                Vector3::x()
            } else if abs.y <= abs.z {
                Vector3::y()
            } else {
                Vector3::z()
            };
            line.cross(&axis).normalize()
        } else {
            eigenvectors[0]
        };
        let normal = orient_normal(raw);
        let sign = if normal.dot(&raw) < 0.0 { -1.0 } else { 1.0 };
        let signed_offset = normal.dot(&(p - centroid));
        Self {
            frame: PcaFrame {
                normal,
                centroid,
                offset: signed_offset.abs(),
                degenerate,
            },
            eigenvalues,
            eigenvectors,
            sign,
            signed_offset,
        }
    }

    /// Pulls adjoints of the frame's normal back onto the neighbourhood points.
    ///
    /// Returns the gradient with respect to each neighbour, in neighbourhood order.
    /// Degenerate frames are treated as having a locally constant normal.
    pub fn normal_vjp(
        &self,
        neighbors: &[Point3<f64>],
        normal_bar: &Vector3<f64>,
    ) -> Vec<Vector3<f64>> {
        if self.frame.degenerate {
            return vec![Vector3::zeros(); neighbors.len()];
        }
        let e0 = self.eigenvectors[0];
        let bar = normal_bar * self.sign;
        // d e0 = Σ_k e_k (e_kᵀ dC e0) / (λ0 - λk)
        let mut cbar = Matrix3::zeros();
        for k in 1..3 {
            let gap = self.eigenvalues[0] - self.eigenvalues[k];
            let ek = self.eigenvectors[k];
            cbar += ek * e0.transpose() * (bar.dot(&ek) / gap);
        }
        let cbar = (cbar + cbar.transpose()) * 0.5;
        let m = neighbors.len() as f64;
        neighbors
            .iter()
            .map(|q| cbar * (q - self.frame.centroid) * (2.0 / m))
            .collect()
    }
}
