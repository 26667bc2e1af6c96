//! Experiments built on the stencil algebra.

pub mod biharmonic;
pub mod cahn_hilliard;
pub mod convergence;

use thiserror::Error;

use crate::error::StencilError;
use crate::grid::GridError;
use crate::linalg::LinalgError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PdeError {
    #[error(transparent)]
    Stencil(#[from] StencilError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("a log-log fit needs at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("sample (h = {h}, error = {error}) is not positive")]
    NonPositiveSample { h: f64, error: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
