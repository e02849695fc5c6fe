use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cagewarp_testkit::{bumpy_sphere, regular_tetrahedron, unit_cube, Mesh};
use serde_json::Value;
use tempfile::TempDir;

fn cagewarp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cagewarp"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = cagewarp(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_mesh(dir: &Path, name: &str, m: &Mesh) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, m.to_obj()).unwrap();
    p
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn count_lines(path: impl AsRef<Path>, prefix: &str) -> usize {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| l.starts_with(prefix))
        .count()
}

fn shape() -> Mesh {
    bumpy_sphere(6, 10, 0.15).unit_box()
}

#[test]
fn make_cage_writes_templates() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write_mesh(d, "cube.obj", &unit_cube());
    ok(d, &["make-cage", "--mesh", "cube.obj", "--out", "a"]);
    assert_eq!(count_lines(d.join("a/cage.obj"), "v "), 42);
    assert_eq!(count_lines(d.join("a/cage.obj"), "f "), 80);
    ok(
        d,
        &[
            "make-cage",
            "--mesh",
            "cube.obj",
            "--template",
            "sphere162",
            "--out",
            "b",
        ],
    );
    assert_eq!(count_lines(d.join("b/cage.obj"), "v "), 162);
    let report = json(d.join("b/report.json"));
    assert_eq!(report["command"], "make-cage");
    assert_eq!(report["metrics"]["vertices"], 162);
    let manifest = json(d.join("b/manifest.json"));
    assert_eq!(manifest["status"], "completed");
    assert_eq!(manifest["inputs"]["cube.obj"].as_str().unwrap().len(), 64);
}

#[test]
fn compute_mvc_writes_rows() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let tet = regular_tetrahedron();
    write_mesh(d, "cage.obj", &tet);
    let v = &tet.vertices;
    fs::write(
        d.join("points.csv"),
        format!("0,0,0\n{},{},{}\n0.1,-0.2,0.05\n", v[2].x, v[2].y, v[2].z),
    )
    .unwrap();
    ok(
        d,
        &[
            "compute-mvc",
            "--cage",
            "cage.obj",
            "--points",
            "points.csv",
        ],
    );
    let text = fs::read_to_string(d.join("out/mvc.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "phi_0,phi_1,phi_2,phi_3,row_sum,status"
    );
    let rows: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    let num = |s: &str| s.parse::<f64>().unwrap();
    for w in &rows[0][..4] {
        assert!((num(w) - 0.25).abs() < 1e-12);
    }
    assert_eq!(rows[1][..4], ["0.0", "0.0", "1.0", "0.0"]);
    assert_eq!(rows[1][5], "on_vertex");
    for r in &rows {
        assert!((num(&r[4]) - 1.0).abs() < 1e-9);
    }

    ok(
        d,
        &[
            "compute-mvc",
            "--cage",
            "cage.obj",
            "--points",
            "points.csv",
            "--format",
            "bin",
            "--out",
            "bin",
        ],
    );
    assert!(d.join("bin/mvc.bin").exists());
}

#[test]
fn deform_to_itself_is_a_fixed_point() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write_mesh(d, "s.obj", &shape());
    fs::write(d.join("cfg.json"), r#"{"max_iters": 200}"#).unwrap();
    ok(
        d,
        &[
            "deform", "--source", "s.obj", "--target", "s.obj", "--config", "cfg.json",
        ],
    );
    let report = json(d.join("out/report.json"));
    let cd = report["metrics"]["final_metrics"]["cd_x100"]
        .as_f64()
        .unwrap();
    assert!(cd <= 1e-2, "{cd}");
    for f in [
        "deformed.obj",
        "cage.obj",
        "deformed_cage.obj",
        "offsets.csv",
        "manifest.json",
    ] {
        assert!(d.join("out").join(f).exists(), "{f}");
    }
    assert_eq!(count_lines(d.join("out/offsets.csv"), ""), 42);
}

#[test]
fn eval_on_identical_meshes_is_zero() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write_mesh(d, "s.obj", &shape());
    ok(
        d,
        &[
            "eval",
            "--deformed",
            "s.obj",
            "--target",
            "s.obj",
            "--source",
            "s.obj",
        ],
    );
    let m = &json(d.join("out/report.json"))["metrics"];
    assert_eq!(m["cd_x100"].as_f64().unwrap(), 0.0);
    assert_eq!(m["dcotlap_x1000"].as_f64().unwrap(), 0.0);
}

#[test]
fn fit_cage_with_identity_landmarks_stops_on_threshold() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write_mesh(d, "s.obj", &shape());
    ok(d, &["make-cage", "--mesh", "s.obj", "--out", "c"]);
    ok(
        d,
        &[
            "fit-cage",
            "--template",
            "c/cage.obj",
            "--source",
            "s.obj",
            "--novel",
            "s.obj",
        ],
    );
    let m = &json(d.join("out/report.json"))["metrics"];
    assert_eq!(m["stop_reason"], "threshold");
    assert!(d.join("out/fitted_cage.obj").exists());
}

#[test]
fn transfer_with_zero_offsets_keeps_the_shape() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write_mesh(d, "s.obj", &shape());
    ok(d, &["make-cage", "--mesh", "s.obj", "--out", "c"]);
    fs::write(d.join("zero.csv"), "0,0,0\n".repeat(42)).unwrap();
    ok(
        d,
        &[
            "transfer",
            "--cage",
            "c/cage.obj",
            "--offsets",
            "zero.csv",
            "--novel",
            "s.obj",
        ],
    );
    let m = &json(d.join("out/report.json"))["metrics"];
    assert!(m["max_displacement"].as_f64().unwrap() < 1e-9);
    assert_eq!(count_lines(d.join("out/transferred.obj"), "v "), 62);
}

#[test]
fn reports_are_byte_identical_across_runs_and_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let s = shape();
    write_mesh(d, "s.obj", &s);
    write_mesh(
        d,
        "t.obj",
        &s.transformed(|p| nalgebra::Point3::new(1.2 * p.x, p.y, 0.9 * p.z)),
    );
    fs::write(d.join("cfg.json"), r#"{"max_iters": 40}"#).unwrap();
    let mut metrics = Vec::new();
    for (threads, out) in [("1", "a"), ("1", "b"), ("2", "c")] {
        ok(
            d,
            &[
                "deform",
                "--source",
                "s.obj",
                "--target",
                "t.obj",
                "--config",
                "cfg.json",
                "--threads",
                threads,
                "--out",
                out,
            ],
        );
        let r = json(d.join(out).join("report.json"));
        metrics.push(serde_json::to_string(&r["metrics"]).unwrap());
        assert_eq!(
            fs::read(d.join("a/deformed.obj")).unwrap(),
            fs::read(d.join(out).join("deformed.obj")).unwrap()
        );
    }
    assert_eq!(metrics[0], metrics[1]);
    assert_eq!(metrics[0], metrics[2]);
}

#[test]
fn failures_exit_nonzero_with_one_line() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let check = |args: &[&str]| {
        let out = cagewarp(d, args);
        assert!(!out.status.success(), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.starts_with("error"), "{err}");
        err.into_owned()
    };

    let err = check(&["make-cage", "--mesh", "missing.obj"]);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    let manifest = json(d.join("out/manifest.json"));
    assert_eq!(manifest["status"], "failed");

    // Usage errors come from the argument parser.
    check(&["make-cage"]);
    check(&["gradcheck", "--op", "no_such_op"]);

    write_mesh(d, "s.obj", &shape());
    fs::write(d.join("bad.json"), r#"{"alpha_mvc": -1}"#).unwrap();
    check(&[
        "deform", "--source", "s.obj", "--target", "s.obj", "--config", "bad.json",
    ]);
    fs::write(d.join("typo.json"), r#"{"alpah_mvc": 1}"#).unwrap();
    check(&[
        "deform",
        "--source",
        "s.obj",
        "--target",
        "s.obj",
        "--config",
        "typo.json",
    ]);

    // An open surface is not a cage.
    let mut open = unit_cube();
    open.faces.pop();
    write_mesh(d, "open.obj", &open);
    fs::write(d.join("p.csv"), "0.5,0.5,0.5\n").unwrap();
    let err = check(&["compute-mvc", "--cage", "open.obj", "--points", "p.csv"]);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
}

#[test]
fn gradcheck_and_train_toy_write_reports() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "gradcheck",
            "--op",
            "deformed",
            "--n-configs",
            "3",
            "--out",
            "g",
        ],
    );
    let g = &json(d.join("g/report.json"))["metrics"];
    assert_eq!(g["pass"], true);
    assert_eq!(g["n_configs"], 3);

    ok(
        d,
        &[
            "train-toy",
            "--epochs",
            "30",
            "--holdout",
            "4",
            "--out",
            "t",
        ],
    );
    let t = &json(d.join("t/report.json"))["metrics"];
    assert_eq!(t["eval"]["n_holdout"], 4);
    assert!(t["eval"]["baseline_ratio"].as_f64().unwrap() <= 1.0);
    let predictor = json(d.join("t/predictor.json"));
    assert_eq!(predictor["activation"], "tanh");
}
