//! Finite-difference verification of every differentiable operation on
//! randomised small instances.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_gradients, grad_deformed, grad_source_cage, GradCheck};
use crate::geometry::{template::icosahedron, Cage, CotLaplacian, PointSet, TriMesh};
use crate::losses::{
    cage_laplacian_loss, cage_laplacian_loss_with_grad, chamfer, chamfer_with_grad,
    l2_corresponded, l2_corresponded_with_grad, mvc_consistency, mvc_consistency_with_grad,
    mvc_penalty, mvc_penalty_with_grad, normal_loss, p2f_loss, shape::local_terms, symmetry_loss,
    symmetry_loss_with_grad, total_loss, total_loss_with_grad, AlignMode, LossWeights, ShapeMode,
    TotalLossInput,
};
use crate::mvc::{compute_mvc, deform, MvcConfig, MvcMatrix};
use crate::Result;

/// Step and tolerance for derivatives with respect to deformed-cage positions.
pub const DEFORMED_FD_STEP: f64 = 1e-5;
pub const DEFORMED_RTOL: f64 = 1e-4;
/// Step and tolerance for everything else (source cage, loss arguments).
pub const SOURCE_FD_STEP: f64 = 1e-6;
pub const SOURCE_RTOL: f64 = 1e-3;

/// Operations covered by [`run_gradcheck`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradOp {
    /// Deformation with respect to the deformed cage.
    Deformed,
    /// Coordinates with respect to the source cage, under a penalty-plus-linear functional.
    SourceCage,
    Chamfer,
    L2,
    MvcPenalty,
    P2f,
    Normal,
    Symmetry,
    /// Landmark consistency through the fitted cage's coordinates.
    Consistency,
    CageLaplacian,
    /// The combined objective with respect to source cage and offsets.
    Total,
}

impl GradOp {
    pub const ALL: [GradOp; 11] = [
        GradOp::Deformed,
        GradOp::SourceCage,
        GradOp::Chamfer,
        GradOp::L2,
        GradOp::MvcPenalty,
        GradOp::P2f,
        GradOp::Normal,
        GradOp::Symmetry,
        GradOp::Consistency,
        GradOp::CageLaplacian,
        GradOp::Total,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GradOp::Deformed => "deformed",
            GradOp::SourceCage => "source-cage",
            GradOp::Chamfer => "chamfer",
            GradOp::L2 => "l2",
            GradOp::MvcPenalty => "mvc-penalty",
            GradOp::P2f => "p2f",
            GradOp::Normal => "normal",
            GradOp::Symmetry => "symmetry",
            GradOp::Consistency => "consistency",
            GradOp::CageLaplacian => "cage-laplacian",
            GradOp::Total => "total",
        }
    }

    /// `(fd_step, rtol)` for this operation.
    pub fn tolerance(self) -> (f64, f64) {
        match self {
            GradOp::Deformed => (DEFORMED_FD_STEP, DEFORMED_RTOL),
            _ => (SOURCE_FD_STEP, SOURCE_RTOL),
        }
    }

    /// Whether near-branch queries are injected for this operation. The combined
    /// objective also differentiates coordinates but is checked on clean instances.
    pub fn through_coordinates(self) -> bool {
        matches!(self, GradOp::SourceCage | GradOp::Consistency)
    }
}

impl fmt::Display for GradOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GradOp {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        GradOp::ALL
            .into_iter()
            .find(|op| op.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = GradOp::ALL.iter().map(|o| o.name()).collect();
                format!(
                    "unknown operation `{s}` (expected one of {})",
                    names.join(", ")
                )
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckOptions {
    pub n_configs: usize,
    pub seed: u64,
    /// Query points placed on cage vertices and faces per instance; they must be
    /// excluded from the source-cage derivative and counted.
    pub near_branch: usize,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            n_configs: 10,
            seed: 0,
            near_branch: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub op: String,
    pub n_configs: usize,
    pub max_rel_err: f64,
    pub pass: bool,
    pub fd_step: f64,
    pub rtol: f64,
    /// Rows placed near a branch switch, over all instances.
    pub injected_rows: usize,
    /// Rows the analytic derivative excluded, over all instances.
    pub excluded_rows: usize,
}

/// Random small instance: an affinely distorted octahedron or icosahedron
/// (at most 12 vertices) and at most 20 query points clear of every branch
/// switch, some of them outside the cage.
#[derive(Debug, Clone)]
pub struct Instance {
    pub cage: Cage,
    pub points: Vec<Point3<f64>>,
    /// Indices of injected near-branch queries (at the end of `points`).
    pub injected: Vec<usize>,
}

fn octahedron() -> (Vec<Vector3<f64>>, Vec<[usize; 3]>) {
    let v = vec![
        Vector3::x(),
        -Vector3::x(),
        Vector3::y(),
        -Vector3::y(),
        Vector3::z(),
        -Vector3::z(),
    ];
    let faces = vec![
        [0, 2, 4],
        [2, 1, 4],
        [1, 3, 4],
        [3, 0, 4],
        [2, 0, 5],
        [1, 2, 5],
        [3, 1, 5],
        [0, 3, 5],
    ];
    (v, faces)
}

fn clearance(cage: &TriMesh, p: &Point3<f64>) -> f64 {
    let planes = cage.faces.iter().map(|f| {
        let n = (cage.vertices[f[1]] - cage.vertices[f[0]])
            .cross(&(cage.vertices[f[2]] - cage.vertices[f[0]]))
            .normalize();
        n.dot(&(p - cage.vertices[f[0]])).abs()
    });
    let verts = cage.vertices.iter().map(|v| (v - p).norm());
    planes.chain(verts).fold(f64::INFINITY, f64::min)
}

impl Instance {
    pub fn random(rng: &mut impl Rng, n_points: usize, near_branch: usize) -> Self {
        let (unit, faces) = if rng.gen_bool(0.5) {
            octahedron()
        } else {
            icosahedron()
        };
        let a = loop {
            let m = Matrix3::identity() + Matrix3::from_fn(|_, _| rng.gen_range(-0.3..0.3));
            if m.determinant() > 0.4 {
                break m;
            }
        };
        let t = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let map = |u: Vector3<f64>| Point3::from(a * u + t);
        let mesh = TriMesh::new(unit.iter().map(|&u| map(u)).collect(), faces).expect("valid cage");
        let margin = 0.02 * mesh.diameter();
        let mut points = Vec::with_capacity(n_points + near_branch);
        while points.len() < n_points {
            let dir = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            if dir.norm() > 1.0 || dir.norm() < 1e-3 {
                continue;
            }
            let p = map(dir.normalize() * rng.gen_range(0.0..1.4f64));
            if clearance(&mesh, &p) > margin {
                points.push(p);
            }
        }
        let mut injected = Vec::new();
        for k in 0..near_branch {
            injected.push(points.len());
            let p = if k % 2 == 0 {
                let v = mesh.vertices[rng.gen_range(0..mesh.vertices.len())];
                v + Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0)) * 1e-10
            } else {
                let f = mesh.faces[rng.gen_range(0..mesh.faces.len())];
                let [x, y, z] = f.map(|i| mesh.vertices[i].coords);
                Point3::from((x + y + z) / 3.0)
            };
            points.push(p);
        }
        Self {
            cage: Cage::new(mesh).expect("closed cage"),
            points,
            injected,
        }
    }

    pub fn mvc_config(&self) -> MvcConfig {
        MvcConfig::for_cage(&self.cage)
    }

    fn cage_at(&self, x: &[f64]) -> Cage {
        self.cage
            .with_vertices(unflatten(x))
            .expect("perturbed cage stays valid")
    }
}

fn flatten(points: &[Point3<f64>]) -> Vec<f64> {
    points.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
}

fn flatten_vectors(v: &[Vector3<f64>]) -> Vec<f64> {
    v.iter().flat_map(|g| [g.x, g.y, g.z]).collect()
}

fn unflatten(x: &[f64]) -> Vec<Point3<f64>> {
    x.chunks_exact(3)
        .map(|c| Point3::new(c[0], c[1], c[2]))
        .collect()
}

fn jitter(rng: &mut impl Rng, points: &[Point3<f64>], scale: f64) -> Vec<Point3<f64>> {
    points
        .iter()
        .map(|p| p + Vector3::from_fn(|_, _| rng.gen_range(-scale..scale)))
        .collect()
}

/// Zeroes the rows listed in `excluded`, so the finite-difference side matches
/// the analytic side's exclusion.
fn mask_rows(mvc: &MvcMatrix, excluded: &[usize]) -> MvcMatrix {
    if excluded.is_empty() {
        return mvc.clone();
    }
    let mut w = mvc.weights().to_vec();
    for &i in excluded {
        w[i * mvc.cols()..(i + 1) * mvc.cols()]
            .iter_mut()
            .for_each(|x| *x = 0.0);
    }
    MvcMatrix::from_rows(mvc.rows(), mvc.cols(), w).expect("same shape")
}

struct Outcome {
    check: GradCheck,
    excluded: usize,
}

/// Runs the finite-difference check of `op` on `opts.n_configs` random instances.
pub fn run_gradcheck(op: GradOp, opts: &GradCheckOptions) -> Result<GradCheckReport> {
    let (fd_step, rtol) = op.tolerance();
    let mut max_rel_err = 0.0f64;
    let mut pass = true;
    let mut excluded_rows = 0;
    let mut injected_rows = 0;
    for k in 0..opts.n_configs {
        let mut rng =
            ChaCha8Rng::seed_from_u64(opts.seed.wrapping_mul(1_000_003).wrapping_add(k as u64));
        let near = if op.through_coordinates() {
            opts.near_branch
        } else {
            0
        };
        let n_points = rng.gen_range(8..=20 - near.min(12));
        let inst = Instance::random(&mut rng, n_points, near);
        let out = check_instance(op, &inst, &mut rng, fd_step, rtol)?;
        injected_rows += inst.injected.len();
        excluded_rows += out.excluded;
        max_rel_err = max_rel_err.max(out.check.max_rel_err);
        pass &= out.check.pass;
    }
    Ok(GradCheckReport {
        op: op.name().to_owned(),
        n_configs: opts.n_configs,
        max_rel_err,
        pass: pass && excluded_rows == injected_rows,
        fd_step,
        rtol,
        injected_rows,
        excluded_rows,
    })
}

fn check_instance(
    op: GradOp,
    inst: &Instance,
    rng: &mut ChaCha8Rng,
    step: f64,
    rtol: f64,
) -> Result<Outcome> {
    let cfg = inst.mvc_config();
    let cage_x = flatten(inst.cage.vertices());
    let pts = &inst.points;
    let plain = |check| Outcome { check, excluded: 0 };
    Ok(match op {
        GradOp::Deformed => {
            let mvc = compute_mvc(&inst.cage, pts, &cfg)?;
            let targets = jitter(rng, pts, 0.5);
            let a = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let f = |x: &[f64]| {
                let d = deform(&mvc, &unflatten(x)).expect("shape");
                d.iter()
                    .zip(&targets)
                    .map(|(p, t)| (p - t).norm_squared() + a.dot(&p.coords).powi(3))
                    .sum::<f64>()
            };
            let x = flatten(&jitter(rng, inst.cage.vertices(), 0.3));
            let d = deform(&mvc, &unflatten(&x))?;
            let dl: Vec<Vector3<f64>> = d
                .iter()
                .zip(&targets)
                .map(|(p, t)| (p - t) * 2.0 + a * (3.0 * a.dot(&p.coords).powi(2)))
                .collect();
            let g = flatten_vectors(&grad_deformed(&mvc, &dl)?);
            plain(check_gradients(f, &x, &g, step, rtol))
        }
        GradOp::SourceCage => {
            let r: Vec<f64> = (0..pts.len() * inst.cage.len())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            let functional = |m: &MvcMatrix| {
                mvc_penalty(m) + m.weights().iter().zip(&r).map(|(p, r)| p * r).sum::<f64>()
            };
            let mvc = compute_mvc(&inst.cage, pts, &cfg)?;
            let (_, mut seed) = mvc_penalty_with_grad(&mvc);
            seed.iter_mut().zip(&r).for_each(|(s, r)| *s += r);
            let g = grad_source_cage(&inst.cage, pts, &cfg, &seed)?;
            let excl = g.excluded_rows.clone();
            let f = |x: &[f64]| {
                let m = compute_mvc(&inst.cage_at(x), pts, &cfg).expect("mvc");
                functional(&mask_rows(&m, &excl))
            };
            Outcome {
                check: check_gradients(f, &cage_x, &flatten_vectors(&g.grad), step, rtol),
                excluded: excl.len(),
            }
        }
        GradOp::Chamfer => {
            let b = jitter(rng, pts, 0.2);
            let na = pts.len();
            let mut x = flatten(pts);
            x.extend(flatten(&b));
            let f = |x: &[f64]| {
                let (a, b) = x.split_at(3 * na);
                chamfer(&unflatten(a), &unflatten(b)).expect("non-empty")
            };
            let c = chamfer_with_grad(pts, &b)?;
            let mut g = flatten_vectors(&c.grad_a);
            g.extend(flatten_vectors(&c.grad_b));
            plain(check_gradients(f, &x, &g, step, rtol))
        }
        GradOp::L2 => {
            let b = jitter(rng, pts, 0.2);
            let f = |x: &[f64]| l2_corresponded(&unflatten(x), &b).expect("sizes");
            let (_, g) = l2_corresponded_with_grad(pts, &b)?;
            plain(check_gradients(
                f,
                &flatten(pts),
                &flatten_vectors(&g),
                step,
                rtol,
            ))
        }
        GradOp::MvcPenalty => {
            let mvc = compute_mvc(&inst.cage, pts, &cfg)?;
            let (rows, cols) = (mvc.rows(), mvc.cols());
            let f = |x: &[f64]| {
                mvc_penalty(&MvcMatrix::from_rows(rows, cols, x.to_vec()).expect("shape"))
            };
            let (_, g) = mvc_penalty_with_grad(&mvc);
            plain(check_gradients(f, mvc.weights(), &g, step, rtol))
        }
        GradOp::P2f | GradOp::Normal => {
            let before = PointSet::new(pts.clone()).with_knn(6).with_pca()?;
            let after = jitter(rng, pts, 0.05);
            let normal = op == GradOp::Normal;
            let f = |x: &[f64]| {
                let a = before
                    .with_points(unflatten(x))
                    .and_then(|a| a.with_pca())
                    .expect("frames");
                if normal {
                    normal_loss(&before, &a).expect("frames")
                } else {
                    p2f_loss(&before, &a).expect("frames")
                }
            };
            let t = local_terms(&before, &after, normal)?;
            let g = if normal { t.d_normal } else { t.d_p2f };
            plain(check_gradients(
                f,
                &flatten(&after),
                &flatten_vectors(&g),
                step,
                rtol,
            ))
        }
        GradOp::Symmetry => {
            let f = |x: &[f64]| symmetry_loss(&unflatten(x)).expect("non-empty");
            let (_, g) = symmetry_loss_with_grad(pts)?;
            plain(check_gradients(
                f,
                &flatten(pts),
                &flatten_vectors(&g),
                step,
                rtol,
            ))
        }
        GradOp::Consistency => {
            // Landmark rows of a distorted copy of the cage play the template.
            let template = inst.cage_at(&flatten(&jitter(rng, inst.cage.vertices(), 0.05)));
            let template_mvc = compute_mvc(&template, pts, &MvcConfig::for_cage(&template))?;
            let fitted = compute_mvc(&inst.cage, pts, &cfg)?;
            let (_, dphi) = mvc_consistency_with_grad(&template_mvc, &fitted)?;
            let g = grad_source_cage(&inst.cage, pts, &cfg, &dphi)?;
            let excl = g.excluded_rows.clone();
            let template_masked = mask_rows(&template_mvc, &excl);
            let f = |x: &[f64]| {
                let m = compute_mvc(&inst.cage_at(x), pts, &cfg).expect("mvc");
                mvc_consistency(&template_masked, &mask_rows(&m, &excl)).expect("shape")
            };
            Outcome {
                check: check_gradients(f, &cage_x, &flatten_vectors(&g.grad), step, rtol),
                excluded: excl.len(),
            }
        }
        GradOp::CageLaplacian => {
            let lap = CotLaplacian::new(inst.cage.mesh())?;
            let before = inst.cage.vertices();
            let after = jitter(rng, before, 0.2);
            let f = |x: &[f64]| cage_laplacian_loss(&lap, before, &unflatten(x)).expect("sizes");
            let (_, g) = cage_laplacian_loss_with_grad(&lap, before, &after)?;
            plain(check_gradients(
                f,
                &flatten(&after),
                &flatten_vectors(&g),
                step,
                rtol,
            ))
        }
        GradOp::Total => check_total(inst, rng, step, rtol)?,
    })
}

/// The combined objective as a function of `[source cage, offsets]`, with the
/// derivative assembled the way the per-pair pipeline does it.
fn check_total(inst: &Instance, rng: &mut ChaCha8Rng, step: f64, rtol: f64) -> Result<Outcome> {
    let n = inst.cage.len();
    let shape = PointSet::new(inst.points.clone()).with_knn(6).with_pca()?;
    let target = jitter(rng, &inst.points, 0.1);
    let weights = LossWeights {
        alpha_mvc: 1.0,
        alpha_shape: 0.1,
        shape_mode: ShapeMode::ManMade,
        clap_weight: 0.05,
    };
    let align = AlignMode::Chamfer;
    let offsets: Vec<Vector3<f64>> = (0..n)
        .map(|_| Vector3::from_fn(|_, _| rng.gen_range(-0.1..0.1)))
        .collect();
    let cfg = inst.mvc_config();
    let mut x = flatten(inst.cage.vertices());
    x.extend(flatten_vectors(&offsets));

    let mvc = compute_mvc(&inst.cage, &inst.points, &cfg)?;
    let moved: Vec<Point3<f64>> = inst
        .cage
        .vertices()
        .iter()
        .zip(&offsets)
        .map(|(v, d)| v + d)
        .collect();
    let deformed = deform(&mvc, &moved)?;
    let loss = total_loss_with_grad(&TotalLossInput {
        source: &shape,
        deformed: &deformed,
        target: &target,
        mvc: &mvc,
        source_cage: inst.cage.vertices(),
        weights: &weights,
        align,
    })?;
    let g = super::cage_layer_vjp(
        &inst.cage,
        &inst.points,
        &cfg,
        &mvc,
        &moved,
        &loss.d_deformed,
        Some(&loss.d_phi),
    )?;
    let src = g.d_loss_d_source_cage.expect("requested");
    let mut grad: Vec<f64> = g
        .d_loss_d_deformed_cage
        .iter()
        .zip(&src)
        .zip(&loss.d_source_cage)
        .flat_map(|((a, b), s)| {
            let v = a + b + s;
            [v.x, v.y, v.z]
        })
        .collect();
    grad.extend(flatten_vectors(&g.d_loss_d_deformed_cage));

    let f = |x: &[f64]| {
        let (c, o) = x.split_at(3 * n);
        let cage = inst.cage_at(c);
        let mvc = compute_mvc(&cage, &inst.points, &cfg).expect("mvc");
        let moved: Vec<Point3<f64>> = unflatten(c)
            .iter()
            .zip(o.chunks_exact(3))
            .map(|(v, d)| v + Vector3::new(d[0], d[1], d[2]))
            .collect();
        let deformed = deform(&mvc, &moved).expect("shape");
        total_loss(&TotalLossInput {
            source: &shape,
            deformed: &deformed,
            target: &target,
            mvc: &mvc,
            source_cage: cage.vertices(),
            weights: &weights,
            align,
        })
        .expect("loss")
        .total
    };
    Ok(Outcome {
        check: check_gradients(f, &x, &grad, step, rtol),
        excluded: g.excluded_rows,
    })
}
