//! Finite-sum stochastic optimization with an adaptive SPIDER method,
//! variance-reduced and plain baselines, exact oracle-call accounting, and
//! numerical checks of the supporting inequalities.

// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod harness;
pub mod optimizers;
pub mod oracle;
pub mod problems;
pub mod vecops;
pub mod verify;

pub use error::{Error, Result};
pub use oracle::{
    component_gradient, component_value, finite_difference_gradient, full_gradient, measure_gradient,
    measure_loss, FiniteSumProblem, OracleCounter, ParamVector,
};
