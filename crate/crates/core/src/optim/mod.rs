//! Local minimizers used by the phase retrieval.

mod lbfgs;
mod nelder_mead;

pub use lbfgs::{lbfgs, LbfgsOptions, LbfgsResult};
pub use nelder_mead::{nelder_mead_bounded, NelderMeadOptions};

/// A located minimum.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}
