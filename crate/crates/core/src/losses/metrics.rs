use serde::{Deserialize, Serialize};

use super::{chamfer, LossError};
use crate::geometry::{normalize_to_unit_box, sample_surface, CotLaplacian, TriMesh};

/// Surface samples per mesh for the chamfer metric.
pub const EVAL_SAMPLES: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    /// Chamfer distance between surface samples of deformed and target, ×10².
    pub cd_x100: f64,
    /// Mean per-vertex distance between cotangent-Laplacian coordinates of source
    /// and deformed (source-geometry Laplacian for both), ×10³.
    pub dcotlap_x1000: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// Detail-preservation and matching metrics.
///
/// All three meshes are first mapped by the similarity that normalises `target`
/// to the unit box, so relative placement is kept.
pub fn eval_metrics(
    deformed: &TriMesh,
    target: &TriMesh,
    source: &TriMesh,
    n_samples: usize,
    seed: u64,
) -> Result<EvalMetrics, LossError> {
    if deformed.vertices.len() != source.vertices.len() || deformed.faces != source.faces {
        return Err(LossError::SizeMismatch(
            "deformed and source must share connectivity".into(),
        ));
    }
    let (target, t) = normalize_to_unit_box(target)?;
    let deformed = t.apply_mesh(deformed);
    let source = t.apply_mesh(source);

    let a = sample_surface(&deformed, n_samples, seed)?;
    let b = sample_surface(&target, n_samples, seed)?;
    let cd = chamfer(&a.points, &b.points)?;

    let lap = CotLaplacian::new(&source)?;
    let ls = lap.apply_points(&source.vertices);
    let ld = lap.apply_points(&deformed.vertices);
    let n = ls.len().max(1) as f64;
    let dcot = ls.iter().zip(&ld).map(|(s, d)| (s - d).norm()).sum::<f64>() / n;

    Ok(EvalMetrics {
        cd_x100: cd * 1e2,
        dcotlap_x1000: dcot * 1e3,
        n_samples,
        seed,
    })
}
