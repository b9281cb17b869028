//! Audit toolkit for tabular predictive pipelines.
//!
//! The crate inspects the three elements of a predictive pipeline -- the
//! data, the model and its predictions -- and computes fairness,
//! accountability and transparency analytics over them. Results are
//! emitted either as deterministic machine-readable reports (deployment
//! mode) or as plot-ready tables (research mode).
//!
//! Module map:
//!
//! - [`dataset`]: immutable tabular data model, CSV ingestion, schema
//!   inference and group indexing
//! - [`predictors`]: the fit/predict/predict-proba contract plus built-in
//!   reference models and precomputed-prediction ingestion
//! - [`blocks`]: shared algorithmic building blocks (discretizer, one-hot
//!   encoder, Gaussian augmenter, mixed distance, exponential kernel,
//!   weighted ridge)
//! - [`fairness`]: group fairness metrics and data bias checks
//! - [`accountability`]: density scoring, perturbation robustness and
//!   groupwise performance
//! - [`transparency`]: partial dependence, individual conditional
//!   expectation and local surrogate explanations
//! - [`pipeline`]: configuration, report assembly and the two run modes
//!
//! All types are immutable after construction and safe to share across
//! threads; stochastic operations derive every random draw from an
//! explicit seed (see [`rng`]).

pub mod accountability;
pub mod blocks;
pub mod dataset;
pub mod fairness;
pub mod pipeline;
pub mod predictors;
pub mod rng;
pub mod transparency;

pub use dataset::{Dataset, FeatureKind, GroupIndex, LabelVector, Schema, Value};
pub use predictors::{Predictor, ProbabilityMatrix};
pub use rng::DetRng;
