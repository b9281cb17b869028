//! Audit configuration: TOML parsing, command-line overrides, defaults,
//! validation and the reproducibility digest.
//!
//! A config file names the data, the label/protected/positive columns,
//! exactly one predictions source (a precomputed predictions column or a
//! built-in model to train), and the analyses to run. Sections that are
//! absent are simply not run — the report contains exactly what the
//! config requests.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::PathBuf;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::accountability::{PerformanceMetric, DEFAULT_DENSITY_K, DEFAULT_ROBUSTNESS_SPREAD};
use crate::blocks::{DEFAULT_KERNEL_WIDTH, DEFAULT_RIDGE_LAMBDA, DEFAULT_SPREAD};
use crate::fairness::{DisparityMetric, DEFAULT_DISPARITY_TOLERANCE};
use crate::transparency::DEFAULT_GRID_RESOLUTION;

use super::AuditError;

/// Default sample counts for stochastic analyses.
pub const DEFAULT_N_SAMPLES: usize = 1000;
/// Default training split for built-in models.
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;
/// Default neighbour count for the built-in k-NN model.
pub const DEFAULT_KNN_K: usize = 5;
/// Default gradient-descent schedule for the built-in logistic model.
pub const DEFAULT_LOGISTIC_EPOCHS: usize = 200;
pub const DEFAULT_LOGISTIC_LEARNING_RATE: f64 = 0.1;

// ---------------------------------------------------------------------
// Raw (serde) layer: the TOML file exactly as written.
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    data: Option<String>,
    schema: Option<String>,
    labels: String,
    positive: String,
    protected: String,
    output: Option<String>,
    model: Option<RawModel>,
    predictions: Option<RawPredictions>,
    fairness: Option<RawFairness>,
    accountability: Option<RawAccountability>,
    transparency: Option<RawTransparency>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    kind: String,
    k: Option<usize>,
    epochs: Option<usize>,
    learning_rate: Option<f64>,
    train_fraction: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPredictions {
    column: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFairness {
    tolerance: Option<f64>,
    metrics: Option<Vec<String>>,
    disparate_impact: Option<bool>,
    data_bias: Option<bool>,
    systemic_pairs: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAccountability {
    density: Option<RawDensity>,
    robustness: Option<RawRobustness>,
    performance: Option<RawPerformance>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDensity {
    k: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRobustness {
    anchors: Vec<usize>,
    spread: Option<f64>,
    n_samples: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPerformance {
    metrics: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTransparency {
    grid_resolution: Option<usize>,
    pd: Option<Vec<String>>,
    ice: Option<Vec<String>>,
    surrogate: Option<RawSurrogate>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSurrogate {
    anchors: Vec<usize>,
    n_samples: Option<usize>,
    kernel_width: Option<f64>,
    ridge_lambda: Option<f64>,
    spread: Option<f64>,
}

// ---------------------------------------------------------------------
// Validated layer: what the pipeline actually runs.
// ---------------------------------------------------------------------

/// Where predictions come from: a column of the data file (externally
/// produced, audited as-is) or a built-in model trained on a split.
#[derive(Debug, Clone, PartialEq)]
pub enum PredictionSource {
    Column(String),
    Model(ModelConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Majority,
    Knn,
    Logistic,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Majority => "majority",
            ModelKind::Knn => "knn",
            ModelKind::Logistic => "logistic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub k: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub train_fraction: f64,
}

/// One fairness metric request; `EqualizedOdds` pairs tpr with fpr.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FairnessMetricRequest {
    Single(DisparityMetric),
    EqualizedOdds,
}

impl FairnessMetricRequest {
    pub fn name(self) -> &'static str {
        match self {
            FairnessMetricRequest::Single(m) => m.name(),
            FairnessMetricRequest::EqualizedOdds => "equalized_odds",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FairnessConfig {
    pub tolerance: f64,
    pub metrics: Vec<FairnessMetricRequest>,
    pub disparate_impact: bool,
    pub data_bias: bool,
    pub systemic_pairs: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityConfig {
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessConfig {
    pub anchors: Vec<usize>,
    pub spread: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceConfig {
    pub metrics: Vec<PerformanceMetric>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccountabilityConfig {
    pub density: Option<DensityConfig>,
    pub robustness: Option<RobustnessConfig>,
    pub performance: Option<PerformanceConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateRequest {
    pub anchors: Vec<usize>,
    pub n_samples: usize,
    pub kernel_width: f64,
    pub ridge_lambda: f64,
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransparencyConfig {
    pub grid_resolution: usize,
    pub pd_features: Vec<String>,
    pub ice_features: Vec<String>,
    pub surrogate: Option<SurrogateRequest>,
}

/// Fully validated audit configuration with all defaults applied.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditConfig {
    pub seed: u64,
    pub data_path: PathBuf,
    pub schema_path: Option<PathBuf>,
    pub labels_column: String,
    pub positive: String,
    pub protected: String,
    pub output_path: Option<PathBuf>,
    pub source: PredictionSource,
    pub fairness: Option<FairnessConfig>,
    pub accountability: Option<AccountabilityConfig>,
    pub transparency: Option<TransparencyConfig>,
    /// Optional timestamp injected by the caller; knowingly breaks
    /// byte-determinism and is excluded from the digest.
    pub stamp: Option<String>,
    /// Hex SHA-256 of the canonical effective configuration, computed
    /// once at parse time.
    pub digest: String,
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub stamp: Option<String>,
}

fn config_err(message: impl Into<String>) -> AuditError {
    AuditError::Config(message.into())
}

fn require_positive_fraction(name: &str, value: f64) -> Result<(), AuditError> {
    if !(value > 0.0 && value <= 1.0) {
        return Err(config_err(format!("{name} must be in (0, 1], got {value}")));
    }
    Ok(())
}

/// Duplicate entries would collide in report keys and plot file names,
/// so every request list must be duplicate-free.
fn require_distinct<T: PartialEq + std::fmt::Display>(
    name: &str,
    values: &[T],
) -> Result<(), AuditError> {
    for (i, v) in values.iter().enumerate() {
        if values[..i].iter().any(|u| u == v) {
            return Err(config_err(format!("{name} lists `{v}` twice")));
        }
    }
    Ok(())
}

/// Parses a TOML config, applies `overrides` and validates everything
/// that can be checked without the data file.
pub fn parse_config(text: &str, overrides: &Overrides) -> Result<AuditConfig, AuditError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;

    let seed = overrides
        .seed
        .or(raw.seed)
        .ok_or_else(|| config_err("seed is mandatory (set it in the config or pass --seed)"))?;
    let data_path = overrides
        .data
        .clone()
        .or_else(|| raw.data.as_ref().map(PathBuf::from))
        .ok_or_else(|| config_err("no data file (set `data` in the config or pass --data)"))?;
    let schema_path = overrides
        .schema
        .clone()
        .or_else(|| raw.schema.as_ref().map(PathBuf::from));
    let output_path = overrides
        .output
        .clone()
        .or_else(|| raw.output.as_ref().map(PathBuf::from));

    for (field, value) in [
        ("labels", &raw.labels),
        ("positive", &raw.positive),
        ("protected", &raw.protected),
    ] {
        if value.is_empty() {
            return Err(config_err(format!("`{field}` must not be empty")));
        }
    }
    if raw.labels == raw.protected {
        return Err(config_err(
            "`labels` and `protected` must be different columns",
        ));
    }

    let source =
        match (&raw.model, &raw.predictions) {
            (Some(_), Some(_)) => {
                return Err(config_err(
                    "configure either [model] or [predictions], not both",
                ))
            }
            (None, None) => return Err(config_err(
                "one predictions source is required: a [model] to train or a [predictions] column",
            )),
            (Some(m), None) => {
                let kind = match m.kind.as_str() {
                    "majority" => ModelKind::Majority,
                    "knn" => ModelKind::Knn,
                    "logistic" => ModelKind::Logistic,
                    other => {
                        return Err(config_err(format!(
                            "unknown model kind `{other}` (expected majority, knn or logistic)"
                        )))
                    }
                };
                let train_fraction = m.train_fraction.unwrap_or(DEFAULT_TRAIN_FRACTION);
                require_positive_fraction("model.train_fraction", train_fraction)?;
                let k = m.k.unwrap_or(DEFAULT_KNN_K);
                if k == 0 {
                    return Err(config_err("model.k must be at least 1"));
                }
                let epochs = m.epochs.unwrap_or(DEFAULT_LOGISTIC_EPOCHS);
                if epochs == 0 {
                    return Err(config_err("model.epochs must be at least 1"));
                }
                let learning_rate = m.learning_rate.unwrap_or(DEFAULT_LOGISTIC_LEARNING_RATE);
                if learning_rate <= 0.0 || !learning_rate.is_finite() {
                    return Err(config_err(format!(
                        "model.learning_rate must be positive, got {learning_rate}"
                    )));
                }
                PredictionSource::Model(ModelConfig {
                    kind,
                    k,
                    epochs,
                    learning_rate,
                    train_fraction,
                })
            }
            (None, Some(p)) => {
                if p.column.is_empty() {
                    return Err(config_err("predictions.column must not be empty"));
                }
                if p.column == raw.labels {
                    return Err(config_err("predictions.column cannot be the labels column"));
                }
                if p.column == raw.protected {
                    return Err(config_err(
                        "predictions.column cannot be the protected feature",
                    ));
                }
                PredictionSource::Column(p.column.clone())
            }
        };

    let fairness = match &raw.fairness {
        None => None,
        Some(f) => {
            // Reports are JSON, which cannot carry an infinite tolerance,
            // so the config is stricter than the library (which allows it).
            let tolerance = f.tolerance.unwrap_or(DEFAULT_DISPARITY_TOLERANCE);
            if !tolerance.is_finite() || tolerance < 0.0 {
                return Err(config_err(format!(
                    "fairness.tolerance must be finite and non-negative, got {tolerance}"
                )));
            }
            let mut metrics = Vec::new();
            for name in f.metrics.clone().unwrap_or_default() {
                let request = if name == "equalized_odds" {
                    FairnessMetricRequest::EqualizedOdds
                } else {
                    FairnessMetricRequest::Single(
                        DisparityMetric::parse(&name).map_err(|e| config_err(e.to_string()))?,
                    )
                };
                if metrics.contains(&request) {
                    return Err(config_err(format!("fairness.metrics lists `{name}` twice")));
                }
                metrics.push(request);
            }
            Some(FairnessConfig {
                tolerance,
                metrics,
                disparate_impact: f.disparate_impact.unwrap_or(false),
                data_bias: f.data_bias.unwrap_or(false),
                systemic_pairs: f.systemic_pairs.unwrap_or(false),
            })
        }
    };

    let accountability = match &raw.accountability {
        None => None,
        Some(a) => {
            let density = a.density.as_ref().map(|dn| DensityConfig {
                k: dn.k.unwrap_or(DEFAULT_DENSITY_K),
            });
            if let Some(dn) = &density {
                if dn.k == 0 {
                    return Err(config_err("accountability.density.k must be at least 1"));
                }
            }
            let robustness = match &a.robustness {
                None => None,
                Some(r) => {
                    if r.anchors.is_empty() {
                        return Err(config_err(
                            "accountability.robustness.anchors must name at least one row",
                        ));
                    }
                    require_distinct("accountability.robustness.anchors", &r.anchors)?;
                    let spread = r.spread.unwrap_or(DEFAULT_ROBUSTNESS_SPREAD);
                    if !spread.is_finite() || spread < 0.0 {
                        return Err(config_err(format!(
                            "accountability.robustness.spread must be non-negative, got {spread}"
                        )));
                    }
                    let n_samples = r.n_samples.unwrap_or(DEFAULT_N_SAMPLES);
                    if n_samples == 0 {
                        return Err(config_err(
                            "accountability.robustness.n_samples must be at least 1",
                        ));
                    }
                    Some(RobustnessConfig {
                        anchors: r.anchors.clone(),
                        spread,
                        n_samples,
                    })
                }
            };
            let performance = match &a.performance {
                None => None,
                Some(p) => {
                    if p.metrics.is_empty() {
                        return Err(config_err(
                            "accountability.performance.metrics must not be empty",
                        ));
                    }
                    let mut metrics = Vec::new();
                    for name in &p.metrics {
                        let m = PerformanceMetric::parse(name)
                            .map_err(|e| config_err(e.to_string()))?;
                        if metrics.contains(&m) {
                            return Err(config_err(format!(
                                "accountability.performance.metrics lists `{name}` twice"
                            )));
                        }
                        metrics.push(m);
                    }
                    Some(PerformanceConfig { metrics })
                }
            };
            Some(AccountabilityConfig {
                density,
                robustness,
                performance,
            })
        }
    };

    let transparency = match &raw.transparency {
        None => None,
        Some(t) => {
            let grid_resolution = t.grid_resolution.unwrap_or(DEFAULT_GRID_RESOLUTION);
            if grid_resolution < 2 {
                return Err(config_err(format!(
                    "transparency.grid_resolution must be at least 2, got {grid_resolution}"
                )));
            }
            let surrogate = match &t.surrogate {
                None => None,
                Some(s) => {
                    if s.anchors.is_empty() {
                        return Err(config_err(
                            "transparency.surrogate.anchors must name at least one row",
                        ));
                    }
                    require_distinct("transparency.surrogate.anchors", &s.anchors)?;
                    let kernel_width = s.kernel_width.unwrap_or(DEFAULT_KERNEL_WIDTH);
                    if kernel_width <= 0.0 || !kernel_width.is_finite() {
                        return Err(config_err(format!(
                            "transparency.surrogate.kernel_width must be positive, got {kernel_width}"
                        )));
                    }
                    let ridge_lambda = s.ridge_lambda.unwrap_or(DEFAULT_RIDGE_LAMBDA);
                    if !ridge_lambda.is_finite() || ridge_lambda < 0.0 {
                        return Err(config_err(format!(
                            "transparency.surrogate.ridge_lambda must be non-negative, got {ridge_lambda}"
                        )));
                    }
                    let spread = s.spread.unwrap_or(DEFAULT_SPREAD);
                    if !spread.is_finite() || spread < 0.0 {
                        return Err(config_err(format!(
                            "transparency.surrogate.spread must be non-negative, got {spread}"
                        )));
                    }
                    let n_samples = s.n_samples.unwrap_or(DEFAULT_N_SAMPLES);
                    if n_samples == 0 {
                        return Err(config_err(
                            "transparency.surrogate.n_samples must be at least 1",
                        ));
                    }
                    Some(SurrogateRequest {
                        anchors: s.anchors.clone(),
                        n_samples,
                        kernel_width,
                        ridge_lambda,
                        spread,
                    })
                }
            };
            let pd_features = t.pd.clone().unwrap_or_default();
            require_distinct("transparency.pd", &pd_features)?;
            let ice_features = t.ice.clone().unwrap_or_default();
            require_distinct("transparency.ice", &ice_features)?;
            Some(TransparencyConfig {
                grid_resolution,
                pd_features,
                ice_features,
                surrogate,
            })
        }
    };

    // Precomputed predictions cannot answer queries on perturbed or
    // substituted rows, which every model-probing analysis needs.
    if let PredictionSource::Column(_) = source {
        let wants_robustness = accountability
            .as_ref()
            .is_some_and(|a| a.robustness.is_some());
        let wants_transparency = transparency.as_ref().is_some_and(|t| {
            !t.pd_features.is_empty() || !t.ice_features.is_empty() || t.surrogate.is_some()
        });
        if wants_robustness || wants_transparency {
            return Err(config_err(
                "robustness and transparency analyses query the model on new instances, \
                 which a [predictions] column cannot answer; configure a [model] instead",
            ));
        }
    }

    let mut cfg = AuditConfig {
        seed,
        data_path,
        schema_path,
        labels_column: raw.labels,
        positive: raw.positive,
        protected: raw.protected,
        output_path,
        source,
        fairness,
        accountability,
        transparency,
        stamp: overrides.stamp.clone(),
        digest: String::new(),
    };
    cfg.digest = digest_hex(&cfg.canonical_bytes());
    Ok(cfg)
}

fn digest_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        write!(out, "{b:02x}").expect("write to String");
    }
    out
}

fn fmt_f(x: f64) -> String {
    super::json::format_float(x)
}

impl AuditConfig {
    /// Canonical one-line-per-field rendering of the effective
    /// configuration (defaults applied, overrides merged, stamp
    /// excluded). The digest is the SHA-256 of these bytes, so two runs
    /// agree on it exactly when they agree on every effective setting.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut lines: Vec<String> = Vec::new();
        lines.push(format!("seed={}", self.seed));
        lines.push(format!("data={}", self.data_path.display()));
        lines.push(format!(
            "schema={}",
            self.schema_path
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        ));
        lines.push(format!("labels={}", self.labels_column));
        lines.push(format!("positive={}", self.positive));
        lines.push(format!("protected={}", self.protected));
        match &self.source {
            PredictionSource::Column(c) => lines.push(format!("source=column:{c}")),
            PredictionSource::Model(m) => {
                lines.push(format!("source=model:{}", m.kind.name()));
                lines.push(format!("model.k={}", m.k));
                lines.push(format!("model.epochs={}", m.epochs));
                lines.push(format!("model.learning_rate={}", fmt_f(m.learning_rate)));
                lines.push(format!("model.train_fraction={}", fmt_f(m.train_fraction)));
            }
        }
        if let Some(f) = &self.fairness {
            lines.push(format!("fairness.tolerance={}", fmt_f(f.tolerance)));
            let names: Vec<&str> = f.metrics.iter().map(|m| m.name()).collect();
            lines.push(format!("fairness.metrics={}", names.join(",")));
            lines.push(format!("fairness.disparate_impact={}", f.disparate_impact));
            lines.push(format!("fairness.data_bias={}", f.data_bias));
            lines.push(format!("fairness.systemic_pairs={}", f.systemic_pairs));
        }
        if let Some(a) = &self.accountability {
            if let Some(dn) = &a.density {
                lines.push(format!("accountability.density.k={}", dn.k));
            }
            if let Some(r) = &a.robustness {
                let anchors: Vec<String> = r.anchors.iter().map(|i| i.to_string()).collect();
                lines.push(format!(
                    "accountability.robustness.anchors={}",
                    anchors.join(",")
                ));
                lines.push(format!(
                    "accountability.robustness.spread={}",
                    fmt_f(r.spread)
                ));
                lines.push(format!(
                    "accountability.robustness.n_samples={}",
                    r.n_samples
                ));
            }
            if let Some(p) = &a.performance {
                let names: Vec<&str> = p.metrics.iter().map(|m| m.name()).collect();
                lines.push(format!(
                    "accountability.performance.metrics={}",
                    names.join(",")
                ));
            }
        }
        if let Some(t) = &self.transparency {
            lines.push(format!(
                "transparency.grid_resolution={}",
                t.grid_resolution
            ));
            lines.push(format!("transparency.pd={}", t.pd_features.join(",")));
            lines.push(format!("transparency.ice={}", t.ice_features.join(",")));
            if let Some(s) = &t.surrogate {
                let anchors: Vec<String> = s.anchors.iter().map(|i| i.to_string()).collect();
                lines.push(format!(
                    "transparency.surrogate.anchors={}",
                    anchors.join(",")
                ));
                lines.push(format!("transparency.surrogate.n_samples={}", s.n_samples));
                lines.push(format!(
                    "transparency.surrogate.kernel_width={}",
                    fmt_f(s.kernel_width)
                ));
                lines.push(format!(
                    "transparency.surrogate.ridge_lambda={}",
                    fmt_f(s.ridge_lambda)
                ));
                lines.push(format!("transparency.surrogate.spread={}", fmt_f(s.spread)));
            }
        }
        let mut text = lines.join("\n");
        text.push('\n');
        text.into_bytes()
    }

    /// All schema-kind declarations as a sorted map, for the `validate`
    /// summary.
    pub fn summary_fields(&self) -> BTreeMap<&'static str, String> {
        let mut out = BTreeMap::new();
        out.insert("data", self.data_path.display().to_string());
        out.insert("labels", self.labels_column.clone());
        out.insert("positive", self.positive.clone());
        out.insert("protected", self.protected.clone());
        out.insert(
            "source",
            match &self.source {
                PredictionSource::Column(c) => format!("column:{c}"),
                PredictionSource::Model(m) => format!("model:{}", m.kind.name()),
            },
        );
        out
    }
}
