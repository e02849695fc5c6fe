use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{Point3, Vector3};

use super::{
    flatten, flatten_vectors, unflatten, AdamState, CageUpdate, OptimError, OptimReport,
    PipelineConfig, StopReason,
};
use crate::diff::{cage_layer_vjp, grad_deformed};
use crate::geometry::{make_template_cage, Cage, PointSet, TriMesh};
use crate::losses::{eval_metrics, total_loss_with_grad, AlignMode, TotalLossInput, EVAL_SAMPLES};
use crate::mvc::{compute_mvc, deform, MvcConfig, MvcMatrix};

/// Smallest face area a moving cage may reach before the run is aborted.
pub const COLLAPSE_AREA: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct PairResult {
    /// Optimised source cage.
    pub cage: Cage,
    /// Source cage plus offsets.
    pub deformed_cage: Vec<Point3<f64>>,
    pub offsets: Vec<Vector3<f64>>,
    /// Source connectivity with deformed vertices.
    pub deformed: TriMesh,
    pub report: OptimReport,
}

/// Template cage around `source`: half-axes are `cfg.cage_scale` times the
/// half-extent of its bounding box.
pub fn initial_cage(source: &TriMesh, cfg: &PipelineConfig) -> Result<Cage, OptimError> {
    let bbox = source
        .aabb()
        .ok_or(crate::geometry::GeometryError::EmptyMesh)?;
    Ok(make_template_cage(
        cfg.cage_template,
        bbox.center(),
        bbox.extent() * (0.5 * cfg.cage_scale),
    )?)
}

/// Per-pair registration: minimises the total loss over the source cage and its
/// offsets, starting from [`initial_cage`] with zero offsets.
pub fn deform_pair(
    source: &TriMesh,
    target: &TriMesh,
    cfg: &PipelineConfig,
) -> Result<PairResult, OptimError> {
    let cage = initial_cage(source, cfg)?;
    deform_pair_from(source, target, cage, cfg)
}

/// [`deform_pair`] from a given initial cage.
pub fn deform_pair_from(
    source: &TriMesh,
    target: &TriMesh,
    cage: Cage,
    cfg: &PipelineConfig,
) -> Result<PairResult, OptimError> {
    cfg.validate()?;
    if cfg.align_mode == AlignMode::L2 && target.vertices.len() != source.vertices.len() {
        return Err(OptimError::Dimension(format!(
            "L2 alignment needs corresponding vertices: {} source, {} target",
            source.vertices.len(),
            target.vertices.len()
        )));
    }
    let start = Instant::now();
    let weights = cfg.weights();
    let shape = PointSet::from_mesh(source).with_pca()?;
    let points = &source.vertices;
    let faces = cage.faces().to_vec();
    let n = 3 * cage.len();
    let max_iters = cfg.pair_max_iters();

    let mut c = flatten(cage.vertices());
    let mut o = vec![0.0; n];
    let mut adam_c = AdamState::new(n, cfg.pair_step_size());
    let mut adam_o = AdamState::new(n, cfg.pair_step_size());
    let mut trace = Vec::new();
    let mut excluded = 0usize;
    let mut current: Option<(Cage, MvcConfig, MvcMatrix)> = None;
    let mut stop_reason = StopReason::MaxIters;

    let report = |trace: &Vec<_>, stop_reason, excluded: usize| OptimReport {
        iterations: trace.len().saturating_sub(1),
        trace: trace.clone(),
        stop_reason,
        final_metrics: BTreeMap::from([("excluded_rows".to_owned(), excluded as f64)]),
        wall_time: start.elapsed().as_secs_f64(),
    };

    for it in 0..max_iters {
        let update_cage = cfg.cage_update == CageUpdate::Joint || it % cfg.alternate_every == 0;
        if update_cage || current.is_none() {
            let mesh = TriMesh {
                vertices: unflatten(&c),
                faces: faces.clone(),
            };
            let area = mesh.min_face_area();
            if !(area >= COLLAPSE_AREA) {
                return Err(OptimError::CollapsedCage {
                    iteration: it,
                    area,
                    report: Box::new(report(&trace, StopReason::MaxIters, excluded)),
                });
            }
            let cage = Cage::new(mesh)?;
            let mvc_cfg = MvcConfig::for_cage(&cage);
            let mvc = compute_mvc(&cage, points, &mvc_cfg)?;
            current = Some((cage, mvc_cfg, mvc));
        }
        let (cage_now, mvc_cfg, mvc) = current.as_ref().expect("set above");
        let deformed_cage: Vec<Point3<f64>> = cage_now
            .vertices()
            .iter()
            .zip(o.chunks_exact(3))
            .map(|(v, d)| v + Vector3::new(d[0], d[1], d[2]))
            .collect();
        let deformed = deform(mvc, &deformed_cage)?;
        let loss = total_loss_with_grad(&TotalLossInput {
            source: &shape,
            deformed: &deformed,
            target: &target.vertices,
            mvc,
            source_cage: cage_now.vertices(),
            weights: &weights,
            align: cfg.align_mode,
        })?;
        let total = loss.breakdown.total;
        trace.push(loss.breakdown);
        if !total.is_finite() {
            return Err(OptimError::NonFiniteLoss {
                iteration: it,
                report: Box::new(report(&trace, StopReason::MaxIters, excluded)),
            });
        }
        if stalled(&trace, cfg.stall_window, cfg.stall_rel_tol) {
            stop_reason = StopReason::Stall;
            break;
        }
        if it + 1 == max_iters {
            break;
        }

        if update_cage {
            let g = cage_layer_vjp(
                cage_now,
                points,
                mvc_cfg,
                mvc,
                &deformed_cage,
                &loss.d_deformed,
                Some(&loss.d_phi),
            )?;
            excluded += g.excluded_rows;
            let g_o = flatten_vectors(&g.d_loss_d_deformed_cage);
            let src = g.d_loss_d_source_cage.expect("requested");
            let g_c: Vec<Vector3<f64>> = g
                .d_loss_d_deformed_cage
                .iter()
                .zip(&src)
                .zip(&loss.d_source_cage)
                .map(|((a, b), s)| a + b + s)
                .collect();
            adam_o.step(&mut o, &g_o)?;
            adam_c.step(&mut c, &flatten_vectors(&g_c))?;
        } else {
            let g_o = grad_deformed(mvc, &loss.d_deformed)?;
            adam_o.step(&mut o, &flatten_vectors(&g_o))?;
        }
    }

    let (cage_now, _, mvc) = current.expect("at least one iteration");
    let offsets: Vec<Vector3<f64>> = o
        .chunks_exact(3)
        .map(|d| Vector3::new(d[0], d[1], d[2]))
        .collect();
    let deformed_cage: Vec<Point3<f64>> = cage_now
        .vertices()
        .iter()
        .zip(&offsets)
        .map(|(v, d)| v + d)
        .collect();
    let deformed = TriMesh {
        vertices: deform(&mvc, &deformed_cage)?,
        faces: source.faces.clone(),
    };

    let mut report = report(&trace, stop_reason, excluded);
    if let Some(last) = trace.last() {
        report.final_metrics.insert("total".into(), last.total);
    }
    if !target.faces.is_empty() {
        match eval_metrics(&deformed, target, source, EVAL_SAMPLES, cfg.seed) {
            Ok(m) => {
                report.final_metrics.insert("cd_x100".into(), m.cd_x100);
                report
                    .final_metrics
                    .insert("dcotlap_x1000".into(), m.dcotlap_x1000);
            }
            Err(e) => log::warn!("final metrics unavailable: {e}"),
        }
    }
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(PairResult {
        cage: cage_now,
        deformed_cage,
        offsets,
        deformed,
        report,
    })
}

/// Relative improvement of the total over the last `window` iterations is below `tol`.
pub(crate) fn stalled(trace: &[crate::losses::LossBreakdown], window: usize, tol: f64) -> bool {
    if trace.len() <= window {
        return false;
    }
    let cur = trace[trace.len() - 1].total;
    let prev = trace[trace.len() - 1 - window].total;
    prev - cur <= tol * prev.abs()
}
