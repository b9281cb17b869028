//! Transparency analytics: partial dependence, individual conditional
//! expectation and local surrogate explanations.
//!
//! All three regress on the same notion of model response: the
//! probability of a chosen positive label when the predictor can score,
//! otherwise the 0/1 indicator of predicting that label. Responses
//! therefore always lie in [0,1].

use thiserror::Error;

use crate::blocks::{
    exponential_kernel, gaussian_augment, mixed_distance, numeric_ranges, one_hot_encode,
    weighted_ridge_fit, BlockError, SamplerConfig,
};
use crate::dataset::{Dataset, DatasetError, FeatureKind, Value};
use crate::predictors::{Predictor, PredictorError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransparencyError {
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("positive label `{0}` is not a trained label")]
    UnknownPositiveLabel(String),
    #[error("grid resolution must be at least 2, got {0}")]
    InvalidResolution(usize),
    #[error(transparent)]
    Block(#[from] BlockError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("predictor: {0}")]
    Predictor(String),
}

impl From<PredictorError> for TransparencyError {
    fn from(e: PredictorError) -> Self {
        TransparencyError::Predictor(e.to_string())
    }
}

/// Default number of grid points for numeric features.
pub const DEFAULT_GRID_RESOLUTION: usize = 20;

/// Grid construction parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridConfig {
    pub resolution: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            resolution: DEFAULT_GRID_RESOLUTION,
        }
    }
}

/// Values a feature is swept over. Numeric grids hold `resolution`
/// equally spaced points spanning the observed [min, max] (collapsing to
/// a single point for a constant column); categorical grids hold each
/// observed token once, sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub feature: String,
    pub points: Vec<Value>,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Builds the sweep grid for one feature of `d`.
pub fn grid_for_feature(
    d: &Dataset,
    feature: &str,
    cfg: &GridConfig,
) -> Result<Grid, TransparencyError> {
    let j = d
        .schema()
        .index_of(feature)
        .ok_or_else(|| TransparencyError::UnknownFeature(feature.to_string()))?;
    let points = match d.schema().feature(j).kind {
        FeatureKind::Numeric => {
            if cfg.resolution < 2 {
                return Err(TransparencyError::InvalidResolution(cfg.resolution));
            }
            let column = d.numeric_column(j).expect("numeric feature");
            let min = column.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = column.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if min == max {
                vec![Value::Number(min)]
            } else {
                let step = (max - min) / (cfg.resolution - 1) as f64;
                let mut points: Vec<f64> = (0..cfg.resolution)
                    .map(|i| {
                        if i == cfg.resolution - 1 {
                            max
                        } else {
                            min + step * i as f64
                        }
                    })
                    .collect();
                // A microscopic range can round adjacent points together.
                points.dedup();
                points.into_iter().map(Value::Number).collect()
            }
        }
        FeatureKind::Categorical => {
            let mut tokens: Vec<String> = d
                .column(j)
                .map(|v| v.as_category().expect("kind checked").to_string())
                .collect();
            tokens.sort();
            tokens.dedup();
            tokens.into_iter().map(Value::Category).collect()
        }
    };
    Ok(Grid {
        feature: feature.to_string(),
        points,
    })
}

/// Model response per row: probability of `positive` when the predictor
/// scores (a missing probability column means the model never assigns
/// that label any mass, i.e. response 0), else the 0/1 indicator of
/// predicting `positive` — in which case `positive` must be a trained
/// label.
pub fn response_vector(
    p: &dyn Predictor,
    d: &Dataset,
    positive: &str,
) -> Result<Vec<f64>, TransparencyError> {
    match p.predict_proba(d)? {
        Some(m) => Ok(match m.column_of(positive) {
            Some(c) => m.rows().iter().map(|r| r[c]).collect(),
            None => vec![0.0; d.n_rows()],
        }),
        None => {
            if !p.trained_labels().iter().any(|l| l == positive) {
                return Err(TransparencyError::UnknownPositiveLabel(
                    positive.to_string(),
                ));
            }
            let predictions = p.predict(d)?;
            Ok(predictions
                .iter()
                .map(|l| if l == positive { 1.0 } else { 0.0 })
                .collect())
        }
    }
}

/// Individual conditional expectation: one response curve per row of the
/// dataset, swept along the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ICEResult {
    pub grid: Grid,
    /// n_rows × n_points: `curves[i][j]` is the model response on row i
    /// with the swept feature overwritten by grid point j.
    pub curves: Vec<Vec<f64>>,
    pub positive: String,
}

/// Partial dependence: the column-wise mean of the ICE curves.
#[derive(Debug, Clone, PartialEq)]
pub struct PDResult {
    pub grid: Grid,
    pub curve: Vec<f64>,
    pub positive: String,
}

/// Computes ICE curves by substituting each grid point into the swept
/// feature for every row and re-querying the model.
pub fn ice(
    p: &dyn Predictor,
    d: &Dataset,
    feature: &str,
    cfg: &GridConfig,
    positive: &str,
) -> Result<ICEResult, TransparencyError> {
    let grid = grid_for_feature(d, feature, cfg)?;
    let j = d.schema().index_of(feature).expect("grid checked the name");
    let mut curves = vec![Vec::with_capacity(grid.len()); d.n_rows()];
    for point in &grid.points {
        let substituted = d.with_column_constant(j, point)?;
        let responses = response_vector(p, &substituted, positive)?;
        for (i, r) in responses.into_iter().enumerate() {
            curves[i].push(r);
        }
    }
    Ok(ICEResult {
        grid,
        curves,
        positive: positive.to_string(),
    })
}

/// Collapses ICE curves to their column-wise mean. Summation runs in row
/// order, so the result is exactly the mean a caller would compute from
/// [`ICEResult::curves`] directly.
pub fn pd_from_ice(ice: &ICEResult) -> PDResult {
    let n = ice.curves.len() as f64;
    let mut curve = vec![0.0; ice.grid.len()];
    for row in &ice.curves {
        for (j, &v) in row.iter().enumerate() {
            curve[j] += v;
        }
    }
    for v in &mut curve {
        *v /= n;
    }
    PDResult {
        grid: ice.grid.clone(),
        curve,
        positive: ice.positive.clone(),
    }
}

/// Partial dependence of the model on one feature:
/// PD_f(v) = (1/n) Σᵢ response(xᵢ with f←v).
pub fn partial_dependence(
    p: &dyn Predictor,
    d: &Dataset,
    feature: &str,
    cfg: &GridConfig,
    positive: &str,
) -> Result<PDResult, TransparencyError> {
    Ok(pd_from_ice(&ice(p, d, feature, cfg, positive)?))
}

/// Parameters of the local surrogate pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateConfig {
    pub sampler: SamplerConfig,
    pub kernel_width: f64,
    pub ridge_lambda: f64,
}

/// A local linear explanation of one prediction: ridge coefficients over
/// the one-hot encoded neighbourhood of the anchor, with a fidelity
/// score measuring how well the linear model tracks the black box there.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateExplanation {
    pub anchor: Vec<Value>,
    /// Encoded column names (numeric features by name, categorical ones
    /// as `feature=token`), aligned with `weights`.
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub kernel_width: f64,
    /// Weighted R² of the surrogate against the black-box responses on
    /// the sampled neighbourhood; `None` when the black box responded
    /// with a constant (see `constant_response`).
    pub fidelity: Option<f64>,
    /// True when every sampled response was identical, which makes R²
    /// meaningless; the zero weights are still reported.
    pub constant_response: bool,
    pub seed: u64,
}

/// Explains `p` at `anchor` by (1) sampling a gaussian neighbourhood,
/// (2) querying the black box for responses, (3) kernel-weighting the
/// samples by distance to the anchor, (4) one-hot encoding, (5) fitting
/// a weighted ridge model and (6) scoring its weighted R² fidelity.
/// Deterministic given the sampler seed.
pub fn surrogate_explain(
    p: &dyn Predictor,
    anchor: &[Value],
    d: &Dataset,
    cfg: &SurrogateConfig,
    positive: &str,
) -> Result<SurrogateExplanation, TransparencyError> {
    let samples = gaussian_augment(d, anchor, &cfg.sampler)?;
    let responses = response_vector(p, &samples, positive)?;

    let ranges = numeric_ranges(d);
    let mut weights = Vec::with_capacity(samples.n_rows());
    for row in samples.rows() {
        let dist = mixed_distance(d, row, anchor, &ranges)?;
        weights.push(exponential_kernel(dist, cfg.kernel_width)?);
    }

    let encoded = one_hot_encode(&samples);
    let model = weighted_ridge_fit(&encoded.rows, &responses, &weights, cfg.ridge_lambda)?;

    // Weighted R² against the same samples the model was fitted on.
    let w_total: f64 = weights.iter().sum();
    let y_mean: f64 = responses
        .iter()
        .zip(&weights)
        .map(|(y, w)| w * y)
        .sum::<f64>()
        / w_total;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for ((row, &y), &w) in encoded.rows.iter().zip(&responses).zip(&weights) {
        let fitted = model.predict_row(row);
        ss_res += w * (y - fitted) * (y - fitted);
        ss_tot += w * (y - y_mean) * (y - y_mean);
    }
    let (fidelity, constant_response) = if ss_tot == 0.0 {
        (None, true)
    } else {
        (Some(1.0 - ss_res / ss_tot), false)
    };

    Ok(SurrogateExplanation {
        anchor: anchor.to_vec(),
        feature_names: encoded.labels,
        weights: model.weights,
        intercept: model.intercept,
        kernel_width: cfg.kernel_width,
        fidelity,
        constant_response,
        seed: cfg.sampler.seed,
    })
}
