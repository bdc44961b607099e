//! Grids, paths, RNG substreams and Monte Carlo estimates.

mod estimate;
mod grid;
mod path;
mod rng;

pub use estimate::{kurtosis, pairwise_sum, sample_mean, sample_variance, MCEstimate};
pub use grid::TimeGrid;
pub use path::{linear_interpolate, pointwise_leq, stepwise_approximation, Path, PathKind};
pub use rng::{RngStream, AUX_STREAM_BASE};

use thiserror::Error;

/// Errors from grid/path construction and estimate assembly.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("grids differ ({0} vs {1} nodes); pointwise comparison needs a shared grid")]
    GridMismatch(usize, usize),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("non-finite sample value at index {0}")]
    NonFiniteSample(usize),
}
