//! Minimal differentiable feed-forward stack: MLPs with cached activations,
//! row-wise l2 normalization, Adam, and finite-difference gradient checking.

mod adam;
mod gradcheck;
mod mlp;
mod normalize;

pub use adam::{AdamState, ParamMut};
pub use gradcheck::{grad_check, matrix_grad_error, rel_error, GradCheckReport, ParamCheck};
pub use mlp::{Activation, Layer, Mlp, MlpGrads};
pub use normalize::{l2_normalize_rows, RowNormalized};
