//! Accountability analytics: data-density reliability scoring, Monte
//! Carlo robustness of predictions under perturbation, and per-group
//! performance gaps.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::blocks::{gaussian_augment, mixed_distance, numeric_ranges, BlockError, SamplerConfig};
use crate::dataset::{Dataset, DatasetError, LabelVector, Value};
use crate::fairness::{grouped_confusion, rates, FairnessError, Rate};
use crate::predictors::{Predictor, PredictorError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AccountabilityError {
    #[error("k = {k} needs at least {} reference rows, found {n}", k + 1)]
    KTooLarge { k: usize, n: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("unknown performance metric `{0}` (expected accuracy, tpr or fpr)")]
    UnknownMetric(String),
    #[error(transparent)]
    Block(#[from] BlockError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Fairness(#[from] FairnessError),
    #[error("predictor: {0}")]
    Predictor(String),
}

impl From<PredictorError> for AccountabilityError {
    fn from(e: PredictorError) -> Self {
        AccountabilityError::Predictor(e.to_string())
    }
}

/// Default neighbour count for density scoring.
pub const DEFAULT_DENSITY_K: usize = 7;

/// Recommended numeric spread for robustness perturbations.
pub const DEFAULT_ROBUSTNESS_SPREAD: f64 = 0.1;

/// Scores how sparsely populated the reference data is around an
/// instance. The raw statistic is the distance to the k-th nearest
/// reference row; scores are normalized by the maximum raw statistic
/// over the reference rows themselves and clipped to [0,1], so 0 means
/// "as dense as the densest training region" and 1 means "at or beyond
/// the sparsest".
#[derive(Debug, Clone)]
pub struct DensityScorer {
    reference: Dataset,
    k: usize,
    ranges: BTreeMap<String, (f64, f64)>,
    normalization: f64,
}

/// Fits a density scorer on reference data. Needs at least k+1 rows so
/// every reference row has k genuine neighbours.
pub fn density_fit(d: &Dataset, k: usize) -> Result<DensityScorer, AccountabilityError> {
    if k == 0 {
        return Err(AccountabilityError::ZeroK);
    }
    if d.n_rows() < k + 1 {
        return Err(AccountabilityError::KTooLarge { k, n: d.n_rows() });
    }
    let ranges = numeric_ranges(d);
    let mut scorer = DensityScorer {
        reference: d.clone(),
        k,
        ranges,
        normalization: 0.0,
    };
    let mut max_raw = 0.0f64;
    for row in d.rows() {
        max_raw = max_raw.max(scorer.raw_statistic(row)?);
    }
    scorer.normalization = max_raw;
    Ok(scorer)
}

impl DensityScorer {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Unnormalized k-th-neighbour distance: the (k+1)-th smallest of the
    /// distances from `instance` to every reference row. For a reference
    /// row this skips past its own zero self-distance, matching the
    /// "k other rows" reading of neighbour.
    pub fn raw_statistic(&self, instance: &[Value]) -> Result<f64, AccountabilityError> {
        let mut distances = Vec::with_capacity(self.reference.n_rows());
        for row in self.reference.rows() {
            distances.push(mixed_distance(
                &self.reference,
                instance,
                row,
                &self.ranges,
            )?);
        }
        distances.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
        Ok(distances[self.k])
    }

    /// Normalized, clipped score in [0,1]; higher means sparser
    /// surroundings and therefore a less reliable prediction region.
    pub fn score(&self, instance: &[Value]) -> Result<f64, AccountabilityError> {
        let raw = self.raw_statistic(instance)?;
        if self.normalization == 0.0 {
            // Degenerate reference (all rows coincide): anything at
            // distance zero is dense, everything else maximally sparse.
            return Ok(if raw == 0.0 { 0.0 } else { 1.0 });
        }
        Ok((raw / self.normalization).clamp(0.0, 1.0))
    }
}

/// Outcome of perturbing one instance many times and re-predicting.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessResult {
    /// Fraction of perturbed samples whose prediction differs from the
    /// prediction at the anchor itself.
    pub flip_rate: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub base_prediction: String,
}

/// Draws `cfg.n_samples` gaussian perturbations of `instance` (spreads
/// scaled by the per-feature deviations of `d`) and measures how often
/// the predictor changes its answer. Deterministic given the seed.
pub fn robustness_flip_rate(
    p: &dyn Predictor,
    instance: &[Value],
    d: &Dataset,
    cfg: &SamplerConfig,
) -> Result<RobustnessResult, AccountabilityError> {
    let anchor_only = Dataset::new(d.schema().clone(), vec![instance.to_vec()])?;
    let base_prediction = p.predict(&anchor_only)?.get(0).to_string();
    let perturbed = gaussian_augment(d, instance, cfg)?;
    let predictions = p.predict(&perturbed)?;
    let flips = predictions.iter().filter(|l| *l != base_prediction).count();
    Ok(RobustnessResult {
        flip_rate: flips as f64 / cfg.n_samples as f64,
        n_samples: cfg.n_samples,
        seed: cfg.seed,
        base_prediction,
    })
}

/// Performance metrics exposed per protected group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerformanceMetric {
    Accuracy,
    Tpr,
    Fpr,
}

impl PerformanceMetric {
    pub fn parse(name: &str) -> Result<Self, AccountabilityError> {
        match name {
            "accuracy" => Ok(PerformanceMetric::Accuracy),
            "tpr" => Ok(PerformanceMetric::Tpr),
            "fpr" => Ok(PerformanceMetric::Fpr),
            other => Err(AccountabilityError::UnknownMetric(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PerformanceMetric::Accuracy => "accuracy",
            PerformanceMetric::Tpr => "tpr",
            PerformanceMetric::Fpr => "fpr",
        }
    }
}

/// One performance rate of a predictor, split by protected group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupwisePerformance {
    pub metric: String,
    pub positive: String,
    pub per_group: BTreeMap<String, Rate>,
}

/// Evaluates the predictor on `d` and reports `metric` per group of the
/// protected feature. Systematic gaps between groups are an
/// accountability signal even when no fairness constraint is configured.
pub fn groupwise_performance(
    p: &dyn Predictor,
    d: &Dataset,
    protected: &str,
    y_true: &LabelVector,
    metric: PerformanceMetric,
    positive: &str,
) -> Result<GroupwisePerformance, AccountabilityError> {
    let y_pred = p.predict(d)?;
    let grouped = grouped_confusion(d, protected, y_true, &y_pred, positive)?;
    let per_group = grouped
        .per_group
        .iter()
        .map(|(g, cm)| {
            let rs = rates(cm);
            let value = match metric {
                PerformanceMetric::Accuracy => rs.accuracy,
                PerformanceMetric::Tpr => rs.tpr,
                PerformanceMetric::Fpr => rs.fpr,
            };
            (g.clone(), value)
        })
        .collect();
    Ok(GroupwisePerformance {
        metric: metric.name().to_string(),
        positive: positive.to_string(),
        per_group,
    })
}
