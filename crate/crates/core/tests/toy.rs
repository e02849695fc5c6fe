mod common;

use cagewarp::diff::check_gradients;
use cagewarp::losses::LossWeights;
use cagewarp::optim::StopReason;
use cagewarp::toy::{
    eval_toy, train_toy, FamilyShape, OffsetPredictor, SyntheticFamily, ToyConfig, ToyProblem,
};
use cagewarp::{Cage, Point3, TriMesh};
use cagewarp_testkit::Mesh;
use common::cage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn octahedron() -> Cage {
    let e = |i: usize, s: f64| {
        let mut p = Point3::origin();
        p[i] = s;
        p
    };
    let vertices = vec![
        e(0, 1.0),
        e(0, -1.0),
        e(1, 1.0),
        e(1, -1.0),
        e(2, 1.0),
        e(2, -1.0),
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
    cage(&Mesh { vertices, faces })
}

fn short(epochs: usize) -> ToyConfig {
    ToyConfig {
        epochs,
        ..ToyConfig::default()
    }
}

#[test]
fn single_target_family() {
    // Target equal to the source: zero offsets are optimal.
    let family = SyntheticFamily::new(FamilyShape::Ellipsoid).single([1.0, 1.0, 1.0]);
    let c = family.cage().unwrap();
    let (p, report) = train_toy(&family, &c, &ToyConfig::default()).unwrap();
    assert!(report.totals()[0] < 1e-20);
    let r = eval_toy(&p, &family, &c, 5, 3).unwrap();
    assert!(r.mean_l2 < 1e-5, "{r:?}");
    let largest = p
        .offsets(&[1.0, 1.0, 1.0])
        .iter()
        .map(|o| o.norm())
        .fold(0.0, f64::max);
    assert!(largest < 1e-4);

    // A single non-trivial target is fitted to near zero error.
    let family = SyntheticFamily::new(FamilyShape::Ellipsoid).single([1.3, 0.8, 1.1]);
    let (p, _) = train_toy(&family, &c, &short(2000)).unwrap();
    let r = eval_toy(&p, &family, &c, 5, 3).unwrap();
    assert!(r.mean_l2 < 1e-2 * r.baseline_mean_l2, "{r:?}");
}

#[test]
fn trained_predictor_beats_the_baseline_and_is_reproducible() {
    let family = SyntheticFamily::new(FamilyShape::Box);
    let c = family.cage().unwrap();
    let cfg = ToyConfig::default();
    let (a, ra) = train_toy(&family, &c, &cfg).unwrap();
    let r = eval_toy(&a, &family, &c, 20, 1234).unwrap();
    assert!(r.baseline_ratio <= 0.5, "{r:?}");
    for v in [
        r.mean_l2,
        r.max_l2,
        r.mean_cd,
        r.max_cd,
        r.baseline_mean_l2,
        r.baseline_max_l2,
        r.baseline_mean_cd,
        r.baseline_max_cd,
    ] {
        assert!(v.is_finite());
    }

    let (b, rb) = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| train_toy(&family, &c, &cfg).unwrap());
    assert_eq!(
        a.params().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.params().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
    assert_eq!(ra.metrics_only(), rb.metrics_only());
}

#[test]
fn analytic_solution_exists_and_training_reaches_it() {
    let family = SyntheticFamily::new(FamilyShape::Ellipsoid);
    let c = family.cage().unwrap();
    let cfg = ToyConfig::default();
    let problem = ToyProblem::new(family.clone(), c.clone(), cfg.weights()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for d in family.sample_descriptors(10, &mut rng) {
        let (loss, _) = problem
            .loss_with_grad(&d, &problem.analytic_offsets(&d))
            .unwrap();
        // Affine reproduction makes the alignment exact; the point-to-plane
        // term still sees the anisotropic scaling of each neighbourhood.
        assert!(loss.value("align").unwrap() < 1e-6, "{d:?} {loss:?}");
        assert_eq!(loss.value("mvc").unwrap(), 0.0);
        assert!(loss.total < 1e-3, "{d:?} {loss:?}");
    }

    let cfg = ToyConfig {
        epochs: 5000,
        loss_threshold: Some(1e-3),
        ..cfg
    };
    let (_, report) = train_toy(&family, &c, &cfg).unwrap();
    assert_eq!(report.stop_reason, StopReason::Threshold);
    assert!(report.last().unwrap().total < 1e-3);
}

#[test]
fn untrained_predictor_is_the_baseline() {
    let family = SyntheticFamily::new(FamilyShape::Ellipsoid);
    let c = family.cage().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = OffsetPredictor::new(3, 16, c.len(), &mut rng);
    let r = eval_toy(&p, &family, &c, 20, 9).unwrap();
    assert_eq!(r.mean_l2, r.baseline_mean_l2);
    assert_eq!(r.max_cd, r.baseline_max_cd);
    assert_eq!(r.baseline_ratio, 1.0);
}

#[test]
fn parameter_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let points: Vec<Point3<f64>> = (0..10)
        .map(|_| {
            Point3::from(nalgebra::Vector3::from_fn(|_, _| {
                rng.gen_range(-0.25..0.25)
            }))
        })
        .collect();
    let family = SyntheticFamily::from_mesh(TriMesh {
        vertices: points,
        faces: vec![],
    });
    let c = octahedron();
    let problem = ToyProblem::new(family.clone(), c.clone(), LossWeights::default()).unwrap();
    for _ in 0..3 {
        let mut p = OffsetPredictor::new(3, 5, c.len(), &mut rng);
        let x: Vec<f64> = (0..p.n_params())
            .map(|_| rng.gen_range(-0.3..0.3))
            .collect();
        p.set_params(&x).unwrap();
        let descriptors = family.sample_descriptors(3, &mut rng);
        let (_, grad) = problem.batch_loss_with_grad(&p, &descriptors).unwrap();
        let f = |x: &[f64]| {
            let mut q = p.clone();
            q.set_params(x).unwrap();
            problem
                .batch_loss_with_grad(&q, &descriptors)
                .unwrap()
                .0
                .total
        };
        let r = check_gradients(f, &x, &grad, 1e-6, 1e-3);
        assert!(r.pass, "{r:?}");
    }
}

#[test]
fn enclosing_cage_keeps_the_penalty_at_zero() {
    let family = SyntheticFamily::new(FamilyShape::Box);
    let c = family.cage().unwrap();
    let cfg = ToyConfig {
        alpha_mvc: 0.0,
        ..short(200)
    };
    let (_, report) = train_toy(&family, &c, &cfg).unwrap();
    assert!(report.trace.iter().all(|b| b.value("mvc").unwrap() == 0.0));
}

#[test]
fn invalid_configurations_are_rejected() {
    let family = SyntheticFamily::new(FamilyShape::Ellipsoid);
    let c = family.cage().unwrap();
    for cfg in [
        ToyConfig {
            hidden: 0,
            ..ToyConfig::default()
        },
        ToyConfig {
            n_train: 0,
            ..ToyConfig::default()
        },
        ToyConfig {
            step_size: 0.0,
            ..ToyConfig::default()
        },
    ] {
        assert!(train_toy(&family, &c, &cfg).is_err());
    }
}
