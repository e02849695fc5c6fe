use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{Point3, Vector3};

use super::{
    flatten, flatten_vectors, unflatten, AdamState, LandmarkPairs, OptimError, OptimReport,
    PipelineConfig, StopReason, COLLAPSE_AREA,
};
use crate::diff::grad_source_cage;
use crate::geometry::{Cage, CotLaplacian, TriMesh};
use crate::losses::{cage_laplacian_loss_with_grad, mvc_consistency_with_grad, LossBreakdown};
use crate::mvc::{compute_mvc, MvcConfig};

/// Runs whose total exceeds this multiple of the initial total are aborted.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

#[derive(Debug, Clone)]
pub struct FitResult {
    pub cage: Cage,
    pub report: OptimReport,
}

/// Fits `template` to `novel` so that each landmark of `novel` has the
/// coordinates its counterpart in `source` has with respect to `template`.
///
/// Minimises `L_consistency + clap_weight · L_Clap` with Adam from the template
/// positions, stopping once `L_consistency < consistency_threshold`.
pub fn fit_cage(
    template: &Cage,
    source: &[Point3<f64>],
    novel: &[Point3<f64>],
    landmarks: &LandmarkPairs,
    cfg: &PipelineConfig,
) -> Result<FitResult, OptimError> {
    cfg.validate()?;
    landmarks.validate(source.len(), novel.len())?;
    if landmarks.is_empty() {
        return Err(OptimError::Config(
            "at least one landmark pair is required".into(),
        ));
    }
    let start = Instant::now();
    let p: Vec<Point3<f64>> = landmarks.pairs.iter().map(|&(s, _)| source[s]).collect();
    let q: Vec<Point3<f64>> = landmarks.pairs.iter().map(|&(_, d)| novel[d]).collect();
    let template_mvc = compute_mvc(template, &p, &MvcConfig::for_cage(template))?;
    let lap = CotLaplacian::new(template.mesh())?;
    let faces = template.faces().to_vec();
    let max_iters = cfg.fit_max_iters();

    let mut x = flatten(template.vertices());
    let mut adam = AdamState::new(x.len(), cfg.fit_step_size());
    let mut trace: Vec<LossBreakdown> = Vec::new();
    let mut excluded = 0usize;
    let mut initial = f64::NAN;
    let mut stop_reason = StopReason::MaxIters;
    let mut last_cage = template.clone();

    let report = |trace: &Vec<LossBreakdown>, stop_reason, excluded: usize| OptimReport {
        iterations: trace.len().saturating_sub(1),
        trace: trace.clone(),
        stop_reason,
        final_metrics: BTreeMap::from([("excluded_rows".to_owned(), excluded as f64)]),
        wall_time: start.elapsed().as_secs_f64(),
    };

    for it in 0..max_iters {
        let mesh = TriMesh {
            vertices: unflatten(&x),
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
        let fitted = compute_mvc(&cage, &q, &mvc_cfg)?;
        let (consistency, dphi) = mvc_consistency_with_grad(&template_mvc, &fitted)?;
        let (clap, dclap) =
            cage_laplacian_loss_with_grad(&lap, template.vertices(), cage.vertices())?;
        let mut b = LossBreakdown::new();
        b.push("consistency", 1.0, consistency);
        b.push("clap", cfg.clap_weight, clap);
        let total = b.total;
        trace.push(b);
        if !total.is_finite() {
            return Err(OptimError::NonFiniteLoss {
                iteration: it,
                report: Box::new(report(&trace, StopReason::MaxIters, excluded)),
            });
        }
        if it == 0 {
            initial = total;
        } else if initial > 0.0 && total > DIVERGENCE_FACTOR * initial {
            return Err(OptimError::Diverged {
                iteration: it,
                loss: total,
                initial,
                report: Box::new(report(&trace, StopReason::MaxIters, excluded)),
            });
        }
        last_cage = cage;
        if consistency < cfg.consistency_threshold {
            stop_reason = StopReason::Threshold;
            break;
        }
        if it + 1 == max_iters {
            break;
        }
        let g = grad_source_cage(&last_cage, &q, &mvc_cfg, &dphi)?;
        excluded += g.excluded_rows.len();
        let grad: Vec<Vector3<f64>> = g
            .grad
            .iter()
            .zip(&dclap)
            .map(|(a, l)| a + l * cfg.clap_weight)
            .collect();
        adam.step(&mut x, &flatten_vectors(&grad))?;
    }

    let mut report = report(&trace, stop_reason, excluded);
    if let Some(last) = trace.last() {
        report.final_metrics.insert(
            "consistency".into(),
            last.value("consistency").unwrap_or(f64::NAN),
        );
        report
            .final_metrics
            .insert("clap".into(), last.value("clap").unwrap_or(f64::NAN));
        report.final_metrics.insert("total".into(), last.total);
    }
    let rms = (last_cage
        .vertices()
        .iter()
        .zip(template.vertices())
        .map(|(a, b)| (a - b).norm_squared())
        .sum::<f64>()
        / template.len() as f64)
        .sqrt();
    report.final_metrics.insert("rms_to_template".into(), rms);
    Ok(FitResult {
        cage: last_cage,
        report,
    })
}
