//! Acceptance suite: one line per criterion, then a single assertion that all
//! of them passed. Run with `cargo test -p cagewarp-cli --test acceptance -- --nocapture`.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use cagewarp::diff::{run_gradcheck, GradCheckOptions, GradOp};
use cagewarp::geometry::{make_template_cage, CotLaplacian, PointSet, TemplateKind};
use cagewarp::losses::{
    cage_laplacian_loss, chamfer, eval_metrics, mvc_consistency, mvc_penalty, normal_loss,
    p2f_loss, symmetry_loss, total_loss, AlignMode, LossWeights, TotalLossInput, EVAL_SAMPLES,
};
use cagewarp::mvc::MvcMatrix;
use cagewarp::optim::{
    deform_pair, fit_cage, initial_cage, LandmarkPairs, PipelineConfig, StopReason,
};
use cagewarp::toy::{eval_toy, train_toy, FamilyShape, SyntheticFamily, ToyConfig};
use cagewarp::{compute_mvc, deform, Cage, MvcConfig, Point3, TriMesh, Vector3};
use cagewarp_testkit::{
    affine_cage, brute_cage_laplacian_loss, brute_mvc_consistency, brute_mvc_penalty, bumpy_sphere,
    mc_mvc, regular_tetrahedron, unit_cube, Mesh,
};
use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn tri(m: &Mesh) -> TriMesh {
    TriMesh::new(m.vertices.clone(), m.faces.clone()).unwrap()
}

fn cage(m: &Mesh) -> Cage {
    Cage::new(tri(m)).unwrap()
}

fn mesh(c: &Cage) -> Mesh {
    Mesh {
        vertices: c.vertices().to_vec(),
        faces: c.faces().to_vec(),
    }
}

fn sphere(kind: TemplateKind) -> Mesh {
    mesh(&make_template_cage(kind, Point3::origin(), Vector3::repeat(1.0)).unwrap())
}

fn convex_point(vertices: &[Point3<f64>], rng: &mut impl Rng) -> Point3<f64> {
    let w: Vec<f64> = vertices.iter().map(|_| rng.gen::<f64>().powi(2)).collect();
    let s: f64 = w.iter().sum();
    Point3::from(
        vertices
            .iter()
            .zip(&w)
            .fold(Vector3::zeros(), |a, (v, w)| a + v.coords * (w / s)),
    )
}

fn reproduce(c: &Cage, row: &[f64]) -> Vector3<f64> {
    c.vertices()
        .iter()
        .zip(row)
        .fold(Vector3::zeros(), |a, (v, w)| a + v.coords * *w)
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let bases = [
        regular_tetrahedron(),
        unit_cube(),
        sphere(TemplateKind::Sphere42),
        sphere(TemplateKind::Sphere162),
        unit_cube(),
    ];
    let (mut pu, mut lp, mut indicator_ok) = (0.0f64, 0.0f64, true);
    for base in &bases {
        let c = cage(&affine_cage(base, &mut rng, 0.3));
        let diam = c.mesh().diameter();
        let bb = c.mesh().aabb().unwrap();
        let mid = bb.center();
        let mut points: Vec<Point3<f64>> = (0..700)
            .map(|_| convex_point(c.vertices(), &mut rng))
            .collect();
        points.extend((0..300).map(|_| {
            mid + bb
                .extent()
                .component_mul(&Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0)))
        }));
        let m = compute_mvc(&c, &points, &MvcConfig::for_cage(&c)).unwrap();
        for (i, p) in points.iter().enumerate() {
            let row = m.row(i);
            pu = pu.max((row.iter().sum::<f64>() - 1.0).abs());
            lp = lp.max((reproduce(&c, row) - p.coords).norm() / diam);
        }
        let at_vertices = compute_mvc(&c, c.vertices(), &MvcConfig::for_cage(&c)).unwrap();
        for j in 0..c.len() {
            indicator_ok &= at_vertices
                .row(j)
                .iter()
                .enumerate()
                .all(|(k, w)| *w == if k == j { 1.0 } else { 0.0 });
        }
    }
    verdict(
        pu <= 1e-9 && lp <= 1e-7 && indicator_ok,
        format!(
            "5 cages x 1000 queries: max |sum-1| {pu:.1e} (<= 1e-9), max LP error {lp:.1e}*diam \
             (<= 1e-7), vertex indicator rows exact: {indicator_ok}"
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for base in [
        regular_tetrahedron(),
        unit_cube(),
        sphere(TemplateKind::Sphere42),
    ] {
        let c = cage(&affine_cage(&base, &mut rng, 0.2));
        let points: Vec<Point3<f64>> = (0..20)
            .map(|_| convex_point(c.vertices(), &mut rng))
            .collect();
        let m = compute_mvc(&c, &points, &MvcConfig::for_cage(&c)).unwrap();
        for (i, p) in points.iter().enumerate() {
            let oracle = mc_mvc(&mesh(&c), p, 1_000_000, rng.gen());
            for (a, b) in m.row(i).iter().zip(&oracle) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    verdict(
        worst <= 2e-3,
        format!("3 cages x 20 queries x 1e6 rays: max |analytic - MC| {worst:.2e} (<= 2e-3)"),
    )
}

fn criterion_3() -> Outcome {
    let opts = GradCheckOptions {
        n_configs: 10,
        seed: 303,
        near_branch: 0,
    };
    let mut lines = Vec::new();
    let mut ok = true;
    for op in GradOp::ALL {
        let r = run_gradcheck(op, &opts).unwrap();
        let rtol = if op == GradOp::Deformed { 1e-4 } else { 1e-3 };
        ok &= r.pass && r.rtol == rtol && r.n_configs >= 10;
        lines.push(format!("{} {:.1e}/{:.0e}", r.op, r.max_rel_err, r.rtol));
    }
    verdict(
        ok,
        format!(
            "10 instances per op, max rel err / rtol: {}",
            lines.join(", ")
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let shape = bumpy_sphere(8, 12, 0.15);
    let mut worst = 0.0f64;
    // Both cages enclose the unit-radius bumpy sphere.
    let cages = [
        sphere(TemplateKind::Sphere42).transformed(|p| Point3::from(p.coords * 1.6)),
        unit_cube().transformed(|p| Point3::from((p.coords - Vector3::repeat(0.5)) * 3.0)),
    ];
    for base in &cages {
        let c = cage(base);
        let m = compute_mvc(&c, &shape.vertices, &MvcConfig::for_cage(&c)).unwrap();
        for _ in 0..5 {
            let a = Matrix3::identity() + Matrix3::from_fn(|_, _| rng.gen_range(-0.5..0.5));
            let t = Vector3::from_fn(|_, _| rng.gen_range(-2.0..2.0));
            let moved: Vec<Point3<f64>> = c
                .vertices()
                .iter()
                .map(|v| Point3::from(a * v.coords + t))
                .collect();
            for (q, p) in deform(&m, &moved).unwrap().iter().zip(&shape.vertices) {
                worst = worst.max((q.coords - (a * p.coords + t)).norm());
            }
        }
    }
    verdict(
        worst <= 1e-7,
        format!("2 cages x 5 random affine maps: max deviation {worst:.1e} (<= 1e-7)"),
    )
}

fn criterion_5() -> Outcome {
    let source = tri(&bumpy_sphere(20, 25, 0.15).unit_box());
    let k = Vector3::new(1.5, 1.0, 0.8);
    let target = TriMesh::new(
        source
            .vertices
            .iter()
            .map(|p| Point3::from(p.coords.component_mul(&k)))
            .collect(),
        source.faces.clone(),
    )
    .unwrap();
    let cfg = PipelineConfig::default();

    // Existence: the analytically moved cage reproduces the target.
    let c = initial_cage(&source, &cfg).unwrap();
    let m = compute_mvc(&c, &source.vertices, &MvcConfig::for_cage(&c)).unwrap();
    let moved: Vec<Point3<f64>> = c
        .vertices()
        .iter()
        .map(|v| Point3::from(v.coords.component_mul(&k)))
        .collect();
    let analytic = TriMesh::new(deform(&m, &moved).unwrap(), source.faces.clone()).unwrap();
    let exact = eval_metrics(&analytic, &target, &source, EVAL_SAMPLES, cfg.seed)
        .unwrap()
        .cd_x100;
    if exact > 1e-3 {
        return Err(format!("analytic cage CDx100 {exact:.2e} (> 1e-3)"));
    }

    let r = deform_pair(&source, &target, &cfg).unwrap();
    let cd = r.report.final_metrics["cd_x100"];
    let dl = r.report.final_metrics["dcotlap_x1000"];
    let iters = r.report.trace.len();
    verdict(
        cd <= 0.5 && iters <= 3000 && dl.is_finite(),
        format!(
            "{} vertices: analytic cage CDx100 {exact:.1e} (<= 1e-3); optimised CDx100 {cd:.3} \
             (<= 0.5) after {iters} evaluations, dCotLapx1000 {dl:.3}",
            source.vertices.len()
        ),
    )
}

fn criterion_6() -> Outcome {
    let cfg = PipelineConfig::default();
    let schedule = cfg.fit_step_size() == 5e-4
        && cfg.fit_max_iters() == 10_000
        && cfg.consistency_threshold == 1e-5
        && cfg.clap_weight == 0.05;
    let s = tri(&bumpy_sphere(6, 10, 0.15).unit_box());
    let template = initial_cage(&s, &cfg).unwrap();
    let t = Vector3::new(0.05, -0.03, 0.02);
    let novel: Vec<Point3<f64>> = s.vertices.iter().map(|p| p + t).collect();
    let r = fit_cage(
        &template,
        &s.vertices,
        &novel,
        &LandmarkPairs::identity(novel.len()),
        &cfg,
    )
    .unwrap();
    let rms = (r
        .cage
        .vertices()
        .iter()
        .zip(template.vertices())
        .map(|(a, b)| (a - (b + t)).norm_squared())
        .sum::<f64>()
        / template.len() as f64)
        .sqrt();
    verdict(
        schedule && r.report.stop_reason == StopReason::Threshold && rms < 1e-2,
        format!(
            "schedule 5e-4/1e4/1e-5/0.05: {schedule}; translated instance stopped by {:?} after \
             {} steps, cage RMS to translated template {rms:.1e} (< 1e-2)",
            r.report.stop_reason, r.report.iterations
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let shape = tri(&bumpy_sphere(8, 12, 0.1).transformed(|p| Point3::from(p.coords * 0.5)));
    let c = cage(&sphere(TemplateKind::Sphere42));
    let source = PointSet::from_mesh(&shape).with_pca().unwrap();
    let mvc = compute_mvc(&c, &shape.vertices, &MvcConfig::for_cage(&c)).unwrap();
    let jitter = |pts: &[Point3<f64>], rng: &mut ChaCha8Rng, a: f64| -> Vec<Point3<f64>> {
        pts.iter()
            .map(|p| p + Vector3::from_fn(|_, _| rng.gen_range(-a..a)))
            .collect()
    };
    let mut worst_total = 0.0f64;
    for align in [AlignMode::Chamfer, AlignMode::L2] {
        let deformed = jitter(&shape.vertices, &mut rng, 0.05);
        let target = jitter(&shape.vertices, &mut rng, 0.1);
        let cage_pts = jitter(c.vertices(), &mut rng, 0.05);
        // Negative entries so the penalty participates.
        let mut w = mvc.weights().to_vec();
        w.iter_mut().step_by(7).for_each(|x| *x -= 0.05);
        let phi = MvcMatrix::from_rows(mvc.rows(), mvc.cols(), w).unwrap();
        let weights = LossWeights::default();
        let b = total_loss(&TotalLossInput {
            source: &source,
            deformed: &deformed,
            target: &target,
            mvc: &phi,
            source_cage: &cage_pts,
            weights: &weights,
            align,
        })
        .unwrap();
        let after = source
            .with_points(deformed.clone())
            .unwrap()
            .with_pca()
            .unwrap();
        let align_value = match align {
            AlignMode::Chamfer => chamfer(&deformed, &target).unwrap(),
            AlignMode::L2 => cagewarp::losses::l2_corresponded(&deformed, &target).unwrap(),
        };
        let shape_value = p2f_loss(&source, &after).unwrap()
            + normal_loss(&source, &after).unwrap()
            + symmetry_loss(&deformed).unwrap()
            + symmetry_loss(&cage_pts).unwrap();
        let expected = 1.0 * mvc_penalty(&phi) + align_value + 0.1 * shape_value;
        worst_total = worst_total.max((b.total - expected).abs());
    }

    let mut worst_brute = 0.0f64;
    // Coordinates of landmarks in a template cage and in a perturbed fit, with
    // queries out to twice the cage so the penalty sees negative entries.
    for (base, rows) in [
        (regular_tetrahedron(), 1),
        (sphere(TemplateKind::Sphere42), 37),
        (unit_cube(), 300),
    ] {
        let template = cage(&affine_cage(&base, &mut rng, 0.2));
        let fitted = template
            .with_vertices(jitter(template.vertices(), &mut rng, 0.05))
            .unwrap();
        let bb = template.mesh().aabb().unwrap();
        let points: Vec<Point3<f64>> = (0..rows)
            .map(|_| {
                bb.center()
                    + bb.extent()
                        .component_mul(&Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0)))
            })
            .collect();
        let a = compute_mvc(&template, &points, &MvcConfig::for_cage(&template)).unwrap();
        let b = compute_mvc(&fitted, &points, &MvcConfig::for_cage(&fitted)).unwrap();
        let (wa, wb, cols) = (a.weights(), b.weights(), a.cols());
        worst_brute = worst_brute.max((mvc_penalty(&a) - brute_mvc_penalty(wa, rows, cols)).abs());
        worst_brute = worst_brute.max(
            (mvc_consistency(&a, &b).unwrap() - brute_mvc_consistency(wa, wb, rows, cols)).abs(),
        );
    }
    let lap = CotLaplacian::new(c.mesh()).unwrap();
    for _ in 0..5 {
        let after = jitter(c.vertices(), &mut rng, 0.2);
        let v = cage_laplacian_loss(&lap, c.vertices(), &after).unwrap();
        worst_brute = worst_brute.max((v - brute_cage_laplacian_loss(&mesh(&c), &after)).abs());
    }
    verdict(
        worst_total <= 1e-12 && worst_brute <= 1e-14,
        format!(
            "total vs independent sum {worst_total:.1e} (<= 1e-12); penalty/consistency/cage-laplacian vs double \
             loops {worst_brute:.1e} (<= 1e-14)"
        ),
    )
}

fn criterion_8() -> Outcome {
    let family = SyntheticFamily::new(FamilyShape::Box);
    let c = family.cage().unwrap();
    let cfg = ToyConfig::default();
    let (a, _) = train_toy(&family, &c, &cfg).unwrap();
    let (b, _) = train_toy(&family, &c, &cfg).unwrap();
    let bitwise = a
        .params()
        .iter()
        .zip(b.params())
        .all(|(x, y)| x.to_bits() == y.to_bits());
    let r = eval_toy(&a, &family, &c, 20, 808).unwrap();
    let improvement = 1.0 - r.baseline_ratio;
    verdict(
        improvement >= 0.5 && bitwise,
        format!(
            "20 held-out descriptors: mean L2 {:.2e} vs baseline {:.2e}, improvement {:.1}% \
             (>= 50%); repeated run bitwise identical: {bitwise}",
            r.mean_l2,
            r.baseline_mean_l2,
            100.0 * improvement
        ),
    )
}

fn cli(dir: &Path, args: &[&str]) -> Value {
    let out = Command::new(env!("CARGO_BIN_EXE_cagewarp"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out_dir = args
        .iter()
        .position(|a| *a == "--out")
        .map(|i| args[i + 1])
        .unwrap();
    serde_json::from_str(&fs::read_to_string(dir.join(out_dir).join("report.json")).unwrap())
        .unwrap()
}

fn criterion_9() -> Outcome {
    let tmp = tempfile::TempDir::new().unwrap();
    let d = tmp.path();
    let s = bumpy_sphere(8, 12, 0.15).unit_box();
    let t = s.transformed(|p| Point3::new(1.3 * p.x, p.y + 0.1 * p.x * p.x, 0.85 * p.z));
    let novel = s.transformed(|p| p + Vector3::new(0.05, -0.03, 0.02));
    fs::write(d.join("s.obj"), s.to_obj()).unwrap();
    fs::write(d.join("t.obj"), t.to_obj()).unwrap();
    fs::write(d.join("n.obj"), novel.to_obj()).unwrap();
    fs::write(d.join("cfg.json"), r#"{"max_iters": 300}"#).unwrap();
    cli(d, &["make-cage", "--mesh", "s.obj", "--out", "cage"]);

    let mut same = Vec::new();
    let mut steps = Vec::new();
    for (name, args) in [
        (
            "deform",
            vec![
                "deform", "--source", "s.obj", "--target", "t.obj", "--config", "cfg.json",
            ],
        ),
        (
            "fit-cage",
            vec![
                "fit-cage",
                "--template",
                "cage/cage.obj",
                "--source",
                "s.obj",
                "--novel",
                "n.obj",
            ],
        ),
    ] {
        let run = |threads: &str| {
            let out = format!("{name}-{threads}");
            let mut a = args.clone();
            a.extend(["--threads", threads, "--out", &out]);
            cli(d, &a)["metrics"].clone()
        };
        let (one, eight) = (run("1"), run("8"));
        // serde_json prints shortest round-trip floats, so equal text is equal bits.
        same.push(serde_json::to_string(&one).unwrap() == serde_json::to_string(&eight).unwrap());
        steps.push(one["trace"].as_array().map_or(0, Vec::len));
    }
    verdict(
        same.iter().all(|s| *s),
        format!(
            "--threads 1 vs 8: deform trace ({} entries) identical: {}, fit-cage trace ({} \
             entries) identical: {}",
            steps[0], same[0], steps[1], same[1]
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut worst = 0.0f64;
    let mut finite = true;
    let mut count = 0;
    for base in [
        regular_tetrahedron(),
        unit_cube(),
        sphere(TemplateKind::Sphere42),
    ] {
        let c = cage(&affine_cage(&base, &mut rng, 0.2));
        let cfg = MvcConfig::for_cage(&c);
        let v = c.vertices();
        let mut points = Vec::new();
        for f in c.faces() {
            let [a, b, e] = f.map(|i| v[i]);
            let n = (b - a).cross(&(e - a)).normalize();
            let centroid = Point3::from((a.coords + b.coords + e.coords) / 3.0);
            let edge_mid = nalgebra::center(&a, &b);
            for scale in [0.0, 0.1, 1.0, 5.0, 20.0] {
                let h = scale * cfg.eps_vertex;
                points.extend([centroid + n * h, centroid - n * h, edge_mid + n * h]);
            }
        }
        for p in v {
            for d in [0.0, 1e-3, 0.5, 1.0, 5.0, 50.0] {
                let dir = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0)).normalize();
                points.push(p + dir * d * cfg.eps_vertex);
            }
        }
        let m = compute_mvc(&c, &points, &cfg).unwrap();
        for i in 0..points.len() {
            finite &= m.row(i).iter().all(|w| w.is_finite());
            worst = worst.max((m.row(i).iter().sum::<f64>() - 1.0).abs());
        }
        count += points.len();
    }

    let opts = GradCheckOptions {
        n_configs: 10,
        seed: 1010,
        near_branch: 3,
    };
    let mut counted = true;
    let mut excluded = 0;
    for op in GradOp::ALL
        .into_iter()
        .filter(|op| op.through_coordinates())
    {
        let r = run_gradcheck(op, &opts).unwrap();
        counted &= r.pass && r.injected_rows == 30 && r.excluded_rows == r.injected_rows;
        excluded += r.excluded_rows;
    }
    verdict(
        finite && worst <= 1e-9 && counted,
        format!(
            "{count} near-vertex/face/edge queries: finite {finite}, max |sum-1| {worst:.1e} \
             (<= 1e-9); gradcheck with 3 injected rows x 10 instances per op: all injected rows \
             excluded and counted ({excluded} total): {counted}"
        ),
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome);

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        (1, "MVC correctness", criterion_1),
        (2, "MVC oracle equivalence", criterion_2),
        (3, "differentiability", criterion_3),
        (4, "affine reproduction", criterion_4),
        (5, "per-pair pipeline", criterion_5),
        (6, "cage fitting schedule", criterion_6),
        (7, "loss arithmetic", criterion_7),
        (8, "toy end-to-end training", criterion_8),
        (9, "determinism", criterion_9),
        (10, "robustness", criterion_10),
    ];
    let mut failed = Vec::new();
    for (n, name, run) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                println!("criterion {n:>2} FAIL  {name}: {detail} [{secs:.1}s]");
                failed.push(n);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
