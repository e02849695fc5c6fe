use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{Point3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{OffsetPredictor, SyntheticFamily};
use crate::diff::grad_deformed;
use crate::geometry::{Cage, PointSet, DEFAULT_KNN};
use crate::losses::{
    chamfer, l2_corresponded, total_loss_with_grad, AlignMode, LossBreakdown, LossWeights,
    ShapeMode, TotalLossInput,
};
use crate::mvc::{compute_mvc, deform, MvcConfig, MvcMatrix};
use crate::optim::{AdamState, OptimError, OptimReport, StopReason};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyConfig {
    pub hidden: usize,
    pub epochs: usize,
    /// Training descriptors, fixed for the whole run (full-batch updates).
    pub n_train: usize,
    pub step_size: f64,
    pub alpha_mvc: f64,
    pub alpha_shape: f64,
    pub shape_mode: ShapeMode,
    pub seed: u64,
    /// Stop early once the training loss drops below this value.
    pub loss_threshold: Option<f64>,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            epochs: 2000,
            n_train: 32,
            step_size: 3e-3,
            alpha_mvc: 1.0,
            alpha_shape: 0.1,
            shape_mode: ShapeMode::Character,
            seed: 0,
            loss_threshold: None,
        }
    }
}

impl ToyConfig {
    pub fn weights(&self) -> LossWeights {
        LossWeights {
            alpha_mvc: self.alpha_mvc,
            alpha_shape: self.alpha_shape,
            shape_mode: self.shape_mode,
            ..LossWeights::default()
        }
    }
}

/// Precomputed quantities of a static-cage deformation problem.
#[derive(Debug, Clone)]
pub struct ToyProblem {
    pub family: SyntheticFamily,
    pub cage: Cage,
    pub shape: PointSet,
    pub mvc: MvcMatrix,
    pub weights: LossWeights,
}

impl ToyProblem {
    /// Neighbourhoods are the source's one-rings, or k-NN for a bare point set.
    pub fn new(
        family: SyntheticFamily,
        cage: Cage,
        weights: LossWeights,
    ) -> Result<Self, OptimError> {
        weights.validate()?;
        let shape = if family.source.faces.is_empty() {
            PointSet::new(family.source.vertices.clone())
                .with_knn(DEFAULT_KNN.min(family.source.vertices.len() - 1))
        } else {
            PointSet::from_mesh(&family.source)
        }
        .with_pca()?;
        let mvc = compute_mvc(&cage, &family.source.vertices, &MvcConfig::for_cage(&cage))?;
        Ok(Self {
            family,
            cage,
            shape,
            mvc,
            weights,
        })
    }

    pub fn deformed(&self, offsets: &[Vector3<f64>]) -> Result<Vec<Point3<f64>>, OptimError> {
        let moved: Vec<Point3<f64>> = self
            .cage
            .vertices()
            .iter()
            .zip(offsets)
            .map(|(v, d)| v + d)
            .collect();
        Ok(deform(&self.mvc, &moved)?)
    }

    /// Loss of one member under the given offsets, and its gradient with respect
    /// to the offsets.
    pub fn loss_with_grad(
        &self,
        descriptor: &[f64; 3],
        offsets: &[Vector3<f64>],
    ) -> Result<(LossBreakdown, Vec<Vector3<f64>>), OptimError> {
        let target = self.family.member(descriptor).vertices;
        let deformed = self.deformed(offsets)?;
        let g = total_loss_with_grad(&TotalLossInput {
            source: &self.shape,
            deformed: &deformed,
            target: &target,
            mvc: &self.mvc,
            source_cage: self.cage.vertices(),
            weights: &self.weights,
            align: AlignMode::L2,
        })?;
        let d_offsets = grad_deformed(&self.mvc, &g.d_deformed)?;
        Ok((g.breakdown, d_offsets))
    }

    /// Offsets reproducing the member exactly: `(diag(s) - I) v_j`.
    pub fn analytic_offsets(&self, descriptor: &[f64; 3]) -> Vec<Vector3<f64>> {
        let s = Vector3::from(*descriptor) - Vector3::repeat(1.0);
        self.cage
            .vertices()
            .iter()
            .map(|v| v.coords.component_mul(&s))
            .collect()
    }

    /// Mean loss over `descriptors` and the predictor's parameter gradient.
    /// Members are evaluated in parallel and reduced in order.
    pub fn batch_loss_with_grad(
        &self,
        predictor: &OffsetPredictor,
        descriptors: &[[f64; 3]],
    ) -> Result<(LossBreakdown, Vec<f64>), OptimError> {
        let per: Vec<(LossBreakdown, Vec<f64>)> = descriptors
            .par_iter()
            .map(|d| {
                let fwd = predictor.forward(d);
                let (b, g) = self.loss_with_grad(d, &fwd.offsets)?;
                Ok((b, predictor.backward(&fwd, &g)))
            })
            .collect::<Result<_, OptimError>>()?;
        let n = descriptors.len().max(1) as f64;
        let mut mean: BTreeMap<String, (f64, f64)> = BTreeMap::new();
        let mut grad = vec![0.0; predictor.n_params()];
        for (b, g) in &per {
            for (name, t) in &b.terms {
                let e = mean.entry(name.clone()).or_insert((t.weight, 0.0));
                e.1 += t.value / n;
            }
            grad.iter_mut().zip(g).for_each(|(a, g)| *a += g / n);
        }
        let mut out = LossBreakdown::new();
        for (name, (w, v)) in mean {
            out.push(&name, w, v);
        }
        Ok((out, grad))
    }
}

/// Trains an offset predictor through the static cage on `family`.
pub fn train_toy(
    family: &SyntheticFamily,
    cage: &Cage,
    cfg: &ToyConfig,
) -> Result<(OffsetPredictor, OptimReport), OptimError> {
    if cfg.hidden == 0 || cfg.n_train == 0 || !(cfg.step_size > 0.0) {
        return Err(OptimError::Config(format!(
            "invalid toy configuration: {cfg:?}"
        )));
    }
    let start = Instant::now();
    let problem = ToyProblem::new(family.clone(), cage.clone(), cfg.weights())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut predictor =
        OffsetPredictor::new(family.descriptor_len(), cfg.hidden, cage.len(), &mut rng);
    let train = family.sample_descriptors(cfg.n_train, &mut rng);
    let mut params = predictor.params();
    let mut adam = AdamState::new(params.len(), cfg.step_size);
    let mut trace = Vec::new();
    let mut stop_reason = StopReason::MaxIters;
    for epoch in 0..cfg.epochs {
        let (loss, grad) = problem.batch_loss_with_grad(&predictor, &train)?;
        let total = loss.total;
        trace.push(loss);
        if !total.is_finite() {
            return Err(OptimError::NonFiniteLoss {
                iteration: epoch,
                report: Box::new(OptimReport {
                    iterations: epoch,
                    trace,
                    stop_reason,
                    final_metrics: BTreeMap::new(),
                    wall_time: start.elapsed().as_secs_f64(),
                }),
            });
        }
        if cfg.loss_threshold.is_some_and(|t| total < t) {
            stop_reason = StopReason::Threshold;
            break;
        }
        if epoch + 1 == cfg.epochs {
            break;
        }
        adam.step(&mut params, &grad)?;
        predictor.set_params(&params)?;
        if !predictor.is_finite() {
            return Err(OptimError::Config(format!(
                "non-finite predictor parameters after epoch {epoch}"
            )));
        }
    }
    let mut final_metrics = BTreeMap::new();
    if let Some(last) = trace.last() {
        final_metrics.insert("train_loss".to_owned(), last.total);
    }
    let report = OptimReport {
        iterations: trace.len().saturating_sub(1),
        trace,
        stop_reason,
        final_metrics,
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok((predictor, report))
}

/// Held-out errors of a predictor and of the zero-offset baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyEvalReport {
    pub n_holdout: usize,
    pub seed: u64,
    pub mean_l2: f64,
    pub max_l2: f64,
    pub mean_cd: f64,
    pub max_cd: f64,
    pub baseline_mean_l2: f64,
    pub baseline_max_l2: f64,
    pub baseline_mean_cd: f64,
    pub baseline_max_cd: f64,
    /// `mean_l2 / baseline_mean_l2`.
    pub baseline_ratio: f64,
}

/// Evaluates on `n_holdout` descriptors drawn with `seed`.
pub fn eval_toy(
    predictor: &OffsetPredictor,
    family: &SyntheticFamily,
    cage: &Cage,
    n_holdout: usize,
    seed: u64,
) -> Result<ToyEvalReport, OptimError> {
    let problem = ToyProblem::new(family.clone(), cage.clone(), LossWeights::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let descriptors = family.sample_descriptors(n_holdout, &mut rng);
    let zero = vec![Vector3::zeros(); cage.len()];
    let mut l2 = Vec::new();
    let mut cd = Vec::new();
    let mut base_l2 = Vec::new();
    let mut base_cd = Vec::new();
    for d in &descriptors {
        let target = family.member(d).vertices;
        let ours = problem.deformed(&predictor.offsets(d))?;
        let base = problem.deformed(&zero)?;
        l2.push(l2_corresponded(&ours, &target)?);
        cd.push(chamfer(&ours, &target)?);
        base_l2.push(l2_corresponded(&base, &target)?);
        base_cd.push(chamfer(&base, &target)?);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let max = |v: &[f64]| v.iter().copied().fold(0.0f64, f64::max);
    let (m, bm) = (mean(&l2), mean(&base_l2));
    Ok(ToyEvalReport {
        n_holdout,
        seed,
        mean_l2: m,
        max_l2: max(&l2),
        mean_cd: mean(&cd),
        max_cd: max(&cd),
        baseline_mean_l2: bm,
        baseline_max_l2: max(&base_l2),
        baseline_mean_cd: mean(&base_cd),
        baseline_max_cd: max(&base_cd),
        baseline_ratio: if bm > 0.0 {
            m / bm
        } else if m > 0.0 {
            f64::INFINITY
        } else {
            1.0
        },
    })
}
