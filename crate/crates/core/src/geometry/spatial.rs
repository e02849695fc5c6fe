use nalgebra::Point3;

/// Static 3-d tree over a point slice. Queries are exact; distance ties resolve
/// to the smaller point index.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point3<f64>>,
    /// Implicit balanced tree: the node of a slice `[lo, hi)` is its midpoint.
    order: Vec<usize>,
    axes: Vec<u8>,
}

impl KdTree {
    pub fn build(points: &[Point3<f64>]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut axes = vec![0u8; points.len()];
        build_rec(points, &mut order, &mut axes, 0);
        Self {
            points: points.to_vec(),
            order,
            axes,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index and squared distance of the nearest point. `None` for an empty tree.
    pub fn nearest(&self, q: &Point3<f64>) -> Option<(usize, f64)> {
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_rec(q, 0, self.order.len(), &mut best);
        (best.0 != usize::MAX).then_some(best)
    }

    fn nearest_rec(&self, q: &Point3<f64>, lo: usize, hi: usize, best: &mut (usize, f64)) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid];
        let p = &self.points[idx];
        let d2 = (p - q).norm_squared();
        if d2 < best.1 || (d2 == best.1 && idx < best.0) {
            *best = (idx, d2);
        }
        let axis = self.axes[mid] as usize;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.nearest_rec(q, near.0, near.1, best);
        // `<=` so equal-distance points on the far side can still win the index tie-break.
        if diff * diff <= best.1 {
            self.nearest_rec(q, far.0, far.1, best);
        }
    }

    /// The `k` nearest points sorted by (distance, index).
    pub fn k_nearest(&self, q: &Point3<f64>, k: usize) -> Vec<(usize, f64)> {
        let mut found: Vec<(usize, f64)> = Vec::with_capacity(k + 1);
        if k > 0 {
            self.knn_rec(q, k, 0, self.order.len(), &mut found);
        }
        found
    }

    fn knn_rec(
        &self,
        q: &Point3<f64>,
        k: usize,
        lo: usize,
        hi: usize,
        found: &mut Vec<(usize, f64)>,
    ) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid];
        let p = &self.points[idx];
        let d2 = (p - q).norm_squared();
        let key = |e: &(usize, f64)| (e.1, e.0);
        let pos = found.partition_point(|e| key(e) < (d2, idx));
        if pos < k {
            found.insert(pos, (idx, d2));
            found.truncate(k);
        }
        let axis = self.axes[mid] as usize;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.knn_rec(q, k, near.0, near.1, found);
        let worst = if found.len() < k {
            f64::INFINITY
        } else {
            found[k - 1].1
        };
        if diff * diff <= worst {
            self.knn_rec(q, k, far.0, far.1, found);
        }
    }
}

fn build_rec(points: &[Point3<f64>], order: &mut [usize], axes: &mut [u8], depth: usize) {
    if order.is_empty() {
        return;
    }
    // Split along the widest extent of this slice.
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in order.iter() {
        for a in 0..3 {
            lo[a] = lo[a].min(points[i][a]);
            hi[a] = hi[a].max(points[i][a]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a)))
        .unwrap_or(depth % 3);
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
    });
    axes[mid] = axis as u8;
    let (left, rest) = order.split_at_mut(mid);
    let (left_axes, rest_axes) = axes.split_at_mut(mid);
    build_rec(points, left, left_axes, depth + 1);
    build_rec(points, &mut rest[1..], &mut rest_axes[1..], depth + 1);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(points: &[Point3<f64>], q: &Point3<f64>) -> (usize, f64) {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, (p - q).norm_squared()))
            .fold(
                (usize::MAX, f64::INFINITY),
                |b, c| if c.1 < b.1 { c } else { b },
            )
    }

    #[test]
    fn matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1usize, 2, 3, 10, 200] {
            let pts: Vec<_> = (0..n)
                .map(|_| Point3::new(rng.gen(), rng.gen(), rng.gen::<f64>()))
                .collect();
            let tree = KdTree::build(&pts);
            for _ in 0..100 {
                let q = Point3::new(rng.gen::<f64>() * 1.4 - 0.2, rng.gen(), rng.gen());
                assert_eq!(tree.nearest(&q), Some(brute(&pts, &q)));
                let knn = tree.k_nearest(&q, 5);
                let mut all: Vec<_> = pts
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (i, (p - q).norm_squared()))
                    .collect();
                all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                all.truncate(5);
                assert_eq!(knn, all);
            }
        }
    }

    #[test]
    fn duplicate_coordinates_and_ties() {
        // Grid points share coordinates on every axis.
        let pts: Vec<_> = (0..64)
            .map(|i| Point3::new((i % 4) as f64, ((i / 4) % 4) as f64, (i / 16) as f64))
            .collect();
        let tree = KdTree::build(&pts);
        for (i, p) in pts.iter().enumerate() {
            assert_eq!(tree.nearest(p), Some((i, 0.0)));
        }
        // Equidistant from points 0 and 1: the smaller index wins.
        assert_eq!(tree.nearest(&Point3::new(0.5, 0.0, 0.0)).unwrap().0, 0);
        assert!(KdTree::build(&[]).nearest(&Point3::origin()).is_none());
    }
}
