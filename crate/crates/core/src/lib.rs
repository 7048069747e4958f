//! Approximate message passing for sparse recovery, the state-evolution
//! recursion that predicts it, a reference penalized least-squares solver,
//! and the experiment harness comparing the three.

// `!(x > 0.0)` is used on purpose so NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amp;
pub mod error;
pub mod experiments;
pub mod lasso;
pub mod nonlinearity;
pub mod par;
pub mod rng;
pub mod signal_model;
pub mod special;
pub mod state_evolution;

pub use error::{Error, Result};
