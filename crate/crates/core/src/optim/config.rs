use std::path::Path;

use serde::{Deserialize, Serialize};

use super::OptimError;
use crate::geometry::TemplateKind;
use crate::losses::{AlignMode, LossWeights, ShapeMode};

/// Default Adam step size of the cage-fitting schedule.
pub const FIT_STEP_SIZE: f64 = 5e-4;
/// Default iteration budget of the cage-fitting schedule.
pub const FIT_MAX_ITERS: usize = 10_000;
/// Default early-stop threshold on the consistency loss.
pub const FIT_CONSISTENCY_THRESHOLD: f64 = 1e-5;
/// Default Adam step size of the per-pair pipeline.
pub const PAIR_STEP_SIZE: f64 = 2e-3;
/// Default iteration budget of the per-pair pipeline.
pub const PAIR_MAX_ITERS: usize = 3000;

/// How the source cage and the offsets are updated in [`deform_pair`](super::deform_pair).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CageUpdate {
    /// Source cage and offsets move together every iteration.
    #[default]
    Joint,
    /// The source cage (and with it the coordinates) is frozen between updates
    /// every `alternate_every` iterations.
    Alternating,
}

/// Configuration shared by the pipelines. Unset `step_size` and `max_iters`
/// fall back to the per-pipeline defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub alpha_mvc: f64,
    pub alpha_shape: f64,
    pub shape_mode: ShapeMode,
    pub align_mode: AlignMode,
    pub step_size: Option<f64>,
    pub max_iters: Option<usize>,
    pub consistency_threshold: f64,
    pub clap_weight: f64,
    pub seed: u64,
    pub cage_template: TemplateKind,
    /// Template cage half-axes as a multiple of the source bounding-box half-extent.
    pub cage_scale: f64,
    pub cage_update: CageUpdate,
    pub alternate_every: usize,
    /// Plateau stop: window length and minimum relative improvement over it.
    pub stall_window: usize,
    pub stall_rel_tol: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let w = LossWeights::default();
        Self {
            alpha_mvc: w.alpha_mvc,
            alpha_shape: w.alpha_shape,
            shape_mode: w.shape_mode,
            align_mode: AlignMode::Chamfer,
            step_size: None,
            max_iters: None,
            consistency_threshold: FIT_CONSISTENCY_THRESHOLD,
            clap_weight: w.clap_weight,
            seed: 0,
            cage_template: TemplateKind::Sphere42,
            cage_scale: 1.05,
            cage_update: CageUpdate::Joint,
            alternate_every: 50,
            stall_window: 200,
            stall_rel_tol: 1e-6,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, OptimError> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| OptimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, OptimError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            alpha_mvc: self.alpha_mvc,
            alpha_shape: self.alpha_shape,
            shape_mode: self.shape_mode,
            clap_weight: self.clap_weight,
        }
    }

    pub fn pair_step_size(&self) -> f64 {
        self.step_size.unwrap_or(PAIR_STEP_SIZE)
    }

    pub fn pair_max_iters(&self) -> usize {
        self.max_iters.unwrap_or(PAIR_MAX_ITERS)
    }

    pub fn fit_step_size(&self) -> f64 {
        self.step_size.unwrap_or(FIT_STEP_SIZE)
    }

    pub fn fit_max_iters(&self) -> usize {
        self.max_iters.unwrap_or(FIT_MAX_ITERS)
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        self.weights().validate()?;
        let bad = |msg: String| Err(OptimError::Config(msg));
        if let Some(s) = self.step_size {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("step_size must be positive, got {s}"));
            }
        }
        if self.max_iters == Some(0) {
            return bad("max_iters must be at least 1".into());
        }
        if !(self.cage_scale > 0.0 && self.cage_scale.is_finite()) {
            return bad(format!(
                "cage_scale must be positive, got {}",
                self.cage_scale
            ));
        }
        if !(self.consistency_threshold >= 0.0) {
            return bad(format!(
                "consistency_threshold must be non-negative, got {}",
                self.consistency_threshold
            ));
        }
        if self.alternate_every == 0 || self.stall_window == 0 {
            return bad("alternate_every and stall_window must be positive".into());
        }
        Ok(())
    }
}
