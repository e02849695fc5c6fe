//! A small offset predictor trained end to end through a static cage.
//!
//! The predictor maps a shape descriptor to cage offsets; the deformed shape is
//! obtained with precomputed coordinates and compared with the family member
//! by corresponded L2, so gradients flow predictor → offsets → deformation →
//! losses.

mod family;
mod predictor;
mod train;

pub use family::{FamilyShape, SyntheticFamily, CAGE_MARGIN, SCALE_RANGE};
pub use predictor::{Forward, Layer, OffsetPredictor};
pub use train::{eval_toy, train_toy, ToyConfig, ToyEvalReport, ToyProblem};
