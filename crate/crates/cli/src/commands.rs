use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use cagewarp::diff::{run_gradcheck, GradCheckOptions, GradOp};
use cagewarp::geometry::{
    load_mesh, load_points, make_template_cage, normalize_to_unit_box, save_mesh, ObjOptions,
    TemplateKind,
};
use cagewarp::losses::eval_metrics;
use cagewarp::mvc::{write_binary, write_csv};
use cagewarp::optim::{
    deform_pair, fit_cage, load_offsets, save_offsets, transfer_mesh, LandmarkPairs, OptimError,
    OptimReport, PipelineConfig,
};
use cagewarp::toy::{eval_toy, train_toy, FamilyShape, SyntheticFamily, ToyConfig};
use cagewarp::{compute_mvc, Cage, MvcConfig, TriMesh};
use log::info;
use serde_json::{json, Value};

use crate::manifest::{write_json, Provenance, Report, RunManifest, RunStatus, REPORT_FILE};
use crate::{Cli, Command, MatrixFormat, Shape, Template};

/// What a command hands back to the run wrapper.
struct Outcome {
    metrics: Value,
    /// Set when the command finished but flagged an error; the report is still written.
    failure: Option<String>,
}

impl Outcome {
    fn ok(metrics: Value) -> Self {
        Self {
            metrics,
            failure: None,
        }
    }
}

/// Output paths a command registers as it writes them.
struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::MakeCage {
            mesh,
            template,
            scale,
        } => {
            let mut cfg = pipeline_config(g.config.as_deref(), g.seed)?;
            if let Some(t) = template {
                cfg.cage_template = match t {
                    Template::Sphere42 => TemplateKind::Sphere42,
                    Template::Sphere162 => TemplateKind::Sphere162,
                };
            }
            if let Some(s) = scale {
                cfg.cage_scale = *s;
            }
            execute(
                cli,
                "make-cage",
                cfg.seed,
                serde_json::to_value(&cfg)?,
                &[mesh],
                |out| {
                    let mesh = load_mesh(mesh, ObjOptions::default())?;
                    let bb = mesh.aabb().ok_or_else(|| anyhow!("mesh has no vertices"))?;
                    let cage = make_template_cage(
                        cfg.cage_template,
                        bb.center(),
                        bb.extent() * (0.5 * cfg.cage_scale),
                    )?;
                    save_mesh(cage.mesh(), out.path("cage.obj"))?;
                    Ok(Outcome::ok(json!({
                        "vertices": cage.len(),
                        "faces": cage.faces().len(),
                    })))
                },
            )
        }
        Command::ComputeMvc {
            cage,
            points,
            format,
        } => {
            let seed = g.seed.unwrap_or(0);
            execute(
                cli,
                "compute-mvc",
                seed,
                Value::Null,
                &[cage, points],
                |out| {
                    let cage = load_cage(cage)?;
                    let points = load_points(points)?;
                    let mvc = compute_mvc(&cage, &points.points, &MvcConfig::for_cage(&cage))?;
                    match format {
                        MatrixFormat::Csv => {
                            write_csv(&mvc, &mut fs::File::create(out.path("mvc.csv"))?)?
                        }
                        MatrixFormat::Bin => {
                            write_binary(&mvc, &mut fs::File::create(out.path("mvc.bin"))?)?
                        }
                    }
                    let max_dev = mvc
                        .row_sums()
                        .iter()
                        .map(|s| (s - 1.0).abs())
                        .fold(0.0, f64::max);
                    let mut status = serde_json::Map::new();
                    for s in mvc.status() {
                        let e = status.entry(s.as_str()).or_insert(json!(0));
                        *e = json!(e.as_u64().unwrap_or(0) + 1);
                    }
                    Ok(Outcome::ok(json!({
                        "rows": mvc.rows(),
                        "cols": mvc.cols(),
                        "max_row_sum_error": max_dev,
                        "status": status,
                    })))
                },
            )
        }
        Command::Deform {
            source,
            target,
            no_normalize,
        } => {
            let cfg = pipeline_config(g.config.as_deref(), g.seed)?;
            execute(
                cli,
                "deform",
                cfg.seed,
                serde_json::to_value(&cfg)?,
                &[source, target],
                |out| {
                    let mut source = load_mesh(source, ObjOptions::default())?;
                    let mut target = load_mesh(target, ObjOptions::default())?;
                    if !no_normalize {
                        source = normalize_to_unit_box(&source)?.0;
                        target = normalize_to_unit_box(&target)?.0;
                        save_mesh(&source, out.path("source.obj"))?;
                        save_mesh(&target, out.path("target.obj"))?;
                    }
                    match deform_pair(&source, &target, &cfg) {
                        Ok(r) => {
                            save_mesh(&r.deformed, out.path("deformed.obj"))?;
                            save_mesh(r.cage.mesh(), out.path("cage.obj"))?;
                            save_mesh(
                                &r.cage.mesh().with_vertices(r.deformed_cage.clone())?,
                                out.path("deformed_cage.obj"),
                            )?;
                            save_offsets(&r.offsets, out.path("offsets.csv"))?;
                            Ok(Outcome::ok(optim_metrics(&r.report)))
                        }
                        Err(e) => optim_failure(e),
                    }
                },
            )
        }
        Command::FitCage {
            template,
            source,
            novel,
            landmarks,
        } => {
            let cfg = pipeline_config(g.config.as_deref(), g.seed)?;
            let mut inputs = vec![template, source, novel];
            inputs.extend(landmarks.as_ref());
            execute(
                cli,
                "fit-cage",
                cfg.seed,
                serde_json::to_value(&cfg)?,
                &inputs,
                |out| {
                    let template = load_cage(template)?;
                    let source = load_points(source)?;
                    let novel = load_points(novel)?;
                    let pairs = match landmarks {
                        Some(p) => LandmarkPairs::load(p)?,
                        None => {
                            if source.len() != novel.len() {
                                bail!(
                                "identity landmarks need equal point counts ({} vs {}); pass --landmarks",
                                source.len(),
                                novel.len()
                            );
                            }
                            LandmarkPairs::identity(source.len())
                        }
                    };
                    match fit_cage(&template, &source.points, &novel.points, &pairs, &cfg) {
                        Ok(r) => {
                            save_mesh(r.cage.mesh(), out.path("fitted_cage.obj"))?;
                            Ok(Outcome::ok(optim_metrics(&r.report)))
                        }
                        Err(e) => optim_failure(e),
                    }
                },
            )
        }
        Command::Transfer {
            cage,
            offsets,
            novel,
        } => {
            let seed = g.seed.unwrap_or(0);
            execute(
                cli,
                "transfer",
                seed,
                Value::Null,
                &[cage, offsets, novel],
                |out| {
                    let cage = load_cage(cage)?;
                    let offsets = load_offsets(offsets)?;
                    let novel = load_mesh(novel, ObjOptions::default())?;
                    let moved = transfer_mesh(&cage, &offsets, &novel)?;
                    save_mesh(&moved, out.path("transferred.obj"))?;
                    let max_disp = novel
                        .vertices
                        .iter()
                        .zip(&moved.vertices)
                        .map(|(a, b)| (a - b).norm())
                        .fold(0.0, f64::max);
                    Ok(Outcome::ok(json!({
                        "vertices": moved.vertices.len(),
                        "max_displacement": max_disp,
                    })))
                },
            )
        }
        Command::Eval {
            deformed,
            target,
            source,
            samples,
        } => {
            let seed = g.seed.unwrap_or(0);
            execute(
                cli,
                "eval",
                seed,
                Value::Null,
                &[deformed, target, source],
                |_| {
                    let deformed = load_mesh(deformed, ObjOptions::default())?;
                    let target = load_mesh(target, ObjOptions::default())?;
                    let source = load_mesh(source, ObjOptions::default())?;
                    let m = eval_metrics(&deformed, &target, &source, *samples, seed)?;
                    Ok(Outcome::ok(serde_json::to_value(m)?))
                },
            )
        }
        Command::Gradcheck {
            op,
            n_configs,
            near_branch,
        } => {
            let seed = g.seed.unwrap_or(0);
            let ops: Vec<GradOp> = if op == "all" {
                GradOp::ALL.to_vec()
            } else {
                vec![op.parse().map_err(|e: String| anyhow!(e))?]
            };
            let opts = GradCheckOptions {
                n_configs: *n_configs,
                seed,
                near_branch: *near_branch,
            };
            let config = json!({ "ops": ops, "n_configs": n_configs, "near_branch": near_branch });
            execute(cli, "gradcheck", seed, config, &[], |_| {
                let mut reports = Vec::new();
                let mut failed = Vec::new();
                for op in ops {
                    let r = run_gradcheck(op, &opts)?;
                    info!("{}: max_rel_err {:e} pass {}", r.op, r.max_rel_err, r.pass);
                    if !r.pass {
                        failed.push(r.op.clone());
                    }
                    reports.push(r);
                }
                let metrics = if reports.len() == 1 {
                    serde_json::to_value(&reports[0])?
                } else {
                    json!({ "pass": failed.is_empty(), "reports": reports })
                };
                Ok(Outcome {
                    metrics,
                    failure: (!failed.is_empty())
                        .then(|| format!("gradient check failed for {}", failed.join(", "))),
                })
            })
        }
        Command::TrainToy {
            shape,
            epochs,
            holdout,
        } => {
            let mut cfg: ToyConfig = match &g.config {
                Some(p) => serde_json::from_str(
                    &fs::read_to_string(p)
                        .with_context(|| format!("cannot read {}", p.display()))?,
                )
                .with_context(|| format!("invalid toy config {}", p.display()))?,
                None => ToyConfig::default(),
            };
            if let Some(s) = g.seed {
                cfg.seed = s;
            }
            if let Some(e) = epochs {
                cfg.epochs = *e;
            }
            execute(
                cli,
                "train-toy",
                cfg.seed,
                serde_json::to_value(&cfg)?,
                &[],
                |out| {
                    let family = SyntheticFamily::new(match shape {
                        Shape::Ellipsoid => FamilyShape::Ellipsoid,
                        Shape::Box => FamilyShape::Box,
                    });
                    let cage = family.cage()?;
                    let (predictor, report) = train_toy(&family, &cage, &cfg)?;
                    fs::write(out.path("predictor.json"), predictor.to_json())?;
                    save_mesh(cage.mesh(), out.path("cage.obj"))?;
                    let eval = eval_toy(
                        &predictor,
                        &family,
                        &cage,
                        *holdout,
                        cfg.seed.wrapping_add(1),
                    )?;
                    Ok(Outcome::ok(json!({
                        "train": optim_metrics(&report),
                        "eval": eval,
                    })))
                },
            )
        }
    }
}

/// Writes the manifest, runs `body`, writes the report and finalises the manifest.
fn execute<F>(
    cli: &Cli,
    command: &str,
    seed: u64,
    config: Value,
    inputs: &[&PathBuf],
    body: F,
) -> Result<()>
where
    F: FnOnce(&mut Outputs) -> Result<Outcome>,
{
    let dir = &cli.global.out;
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut manifest = RunManifest::new(command, seed, cli.global.threads, config);
    manifest.write(dir)?;

    let start = Instant::now();
    let mut outputs = Outputs {
        dir: dir.clone(),
        written: Vec::new(),
    };
    let hashed = cli
        .global
        .config
        .iter()
        .chain(inputs.iter().copied())
        .try_for_each(|p| manifest.add_input(p));
    let result = match hashed {
        Ok(()) => {
            manifest.write(dir)?;
            body(&mut outputs)
        }
        Err(e) => Err(e),
    };
    let wall_time = start.elapsed().as_secs_f64();
    manifest.wall_time = Some(wall_time);
    manifest.outputs = outputs.written;

    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            manifest.status = RunStatus::Failed;
            manifest.error = Some(format!("{e:#}"));
            manifest.write(dir)?;
            return Err(e);
        }
    };
    let report = Report {
        command: command.to_string(),
        metrics: outcome.metrics,
        provenance: Provenance {
            version: manifest.version.clone(),
            seed,
            wall_time,
        },
    };
    let report_path = dir.join(REPORT_FILE);
    write_json(&report_path, &report)?;
    manifest.outputs.push(report_path);
    manifest.status = if outcome.failure.is_some() {
        RunStatus::Failed
    } else {
        RunStatus::Completed
    };
    manifest.error = outcome.failure.clone();
    manifest.write(dir)?;
    match outcome.failure {
        Some(msg) => Err(anyhow!(msg)),
        None => Ok(()),
    }
}

fn pipeline_config(path: Option<&Path>, seed: Option<u64>) -> Result<PipelineConfig> {
    let mut cfg = match path {
        Some(p) => {
            PipelineConfig::load(p).with_context(|| format!("invalid config {}", p.display()))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_cage(path: &Path) -> Result<Cage> {
    let mesh: TriMesh = load_mesh(path, ObjOptions::default())?;
    Cage::new(mesh).with_context(|| format!("invalid cage {}", path.display()))
}

/// Report minus wall time, which goes to provenance.
fn optim_metrics(report: &OptimReport) -> Value {
    report.metrics_only()
}

/// Pipelines that abort mid-run still carry the trace up to the failure.
fn optim_failure(e: OptimError) -> Result<Outcome> {
    match e.report() {
        Some(r) => {
            let mut metrics = optim_metrics(r);
            if let Some(o) = metrics.as_object_mut() {
                o.insert("error".into(), json!(e.to_string()));
            }
            Ok(Outcome {
                metrics,
                failure: Some(e.to_string()),
            })
        }
        None => Err(e.into()),
    }
}
