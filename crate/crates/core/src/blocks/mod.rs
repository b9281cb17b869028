//! Shared algorithmic building blocks reused by the analytics modules:
//! a quartile discretizer, one-hot encoding, a gaussian data augmenter,
//! a mixed numeric/categorical distance, an exponential locality kernel
//! and a weighted ridge regression solver.
//!
//! Everything here is a pure function over immutable inputs; stochastic
//! operations derive all randomness from an explicit seed.

mod augment;
mod discretizer;
mod distance;
mod encoder;
mod kernel;
mod ridge;

pub use augment::{gaussian_augment, SamplerConfig, DEFAULT_SPREAD};
pub use discretizer::{discretize, fit_quartile_discretizer, quantile, Discretizer};
pub use distance::{mixed_distance, numeric_ranges};
pub use encoder::{one_hot_encode, EncodedMatrix};
pub use kernel::{exponential_kernel, DEFAULT_KERNEL_WIDTH};
pub use ridge::{weighted_ridge_fit, LinearModel, DEFAULT_RIDGE_LAMBDA};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BlockError {
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("kernel width must be positive, got {0}")]
    NonPositiveWidth(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("weights must be non-negative and not all zero")]
    DegenerateWeights,
    #[error("normal equations are singular (λ=0 and design is rank-deficient)")]
    SingularSystem,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
