//! Exact derivatives of the cage layer.
//!
//! The deformation `p'_i = Σ_j φ_ji v'_j` is linear in the deformed cage, so its
//! adjoint is a transposed matrix product ([`grad_deformed`]). The dependence on
//! the source cage runs through the coordinates themselves. [`grad_source_cage`]
//! differentiates the branch of the coordinate kernel actually taken, face by
//! face, with forward [`Jet`]s; [`grad_source_cage_tape`] records the same
//! branch on a [`Tape`] and accumulates adjoints in reverse.

mod check;
mod grad;
mod scalar;
pub mod suite;
mod tape;

pub use check::{central_difference, check_gradients, relative_errors, GradCheck};
pub use grad::{
    cage_layer_vjp, grad_deformed, grad_source_cage, grad_source_cage_tape, mvc_jvp, Gradient,
    SourceCageGrad,
};
pub use scalar::{Dual, Jet, Scalar, V3};
pub use suite::{run_gradcheck, GradCheckOptions, GradCheckReport, GradOp};
pub use tape::{Tape, Var};
