//! Concrete finite-sum objectives.

mod erm;
mod mlp;
mod quadratic;
mod regularizer;

pub use erm::{LossKind, RegularizedErm, DEFAULT_LAMBDA};
pub use mlp::{kaiming_uniform_scaled_init, MlpClassification, MlpLayout, MlpNet, DEFAULT_MLP_DIMS};
pub use quadratic::QuadraticProblem;
pub use regularizer::{nonconvex_regularizer, nonconvex_regularizer_grad, REGULARIZER_SMOOTHNESS};
