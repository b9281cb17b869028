//! The two modes of operation: deployment audits (data in → JSON report
//! out) and research runs (data in → plot tables out).
//!
//! Everything downstream of the config is deterministic: per-analysis
//! seeds are derived from the configured seed with fixed purpose
//! indices, report keys are emitted in a documented order, and floats
//! are printed with 17 significant digits. Two runs over the same
//! config and data therefore produce byte-identical output.

pub mod config;
pub mod json;
pub mod plots;
pub mod svg;

pub use config::{
    parse_config, AuditConfig, FairnessMetricRequest, ModelConfig, ModelKind, Overrides,
    PredictionSource, SurrogateRequest,
};
pub use json::Json;
pub use plots::{PlotBundle, PlotTable};

use std::collections::BTreeSet;
use std::fs;

use thiserror::Error;

use crate::accountability::{density_fit, groupwise_performance, robustness_flip_rate};
use crate::blocks::SamplerConfig;
use crate::dataset::{
    group_by_feature, parse_csv_raw, parse_numeric, parse_schema_sidecar, Dataset, FeatureKind,
    LabelVector, Value,
};
use crate::fairness::{
    data_bias_summary, disparate_impact, equalized_odds, grouped_confusion, systemic_bias_pairs,
    ConfusionMatrix, DisparateImpact, DisparityReport, EqualizedOddsReport, GroupedConfusion,
    PairState,
};
use crate::predictors::{
    knn_fit, logistic_fit, majority_fit, PrecomputedPredictor, Predictor, ProbabilityMatrix,
};
use crate::rng::DetRng;
use crate::transparency::{
    ice, partial_dependence, pd_from_ice, surrogate_explain, GridConfig, SurrogateConfig,
    SurrogateExplanation,
};

use config::{AccountabilityConfig, FairnessConfig, TransparencyConfig};

pub const TOOL_NAME: &str = "tabaudit";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Pipeline failures, grouped by who must act: `Config` means the
/// request itself is wrong, `Data` means the inputs do not support the
/// request, `Analysis` means a computation failed on valid inputs. The
/// grouping drives the CLI exit codes.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AuditError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error ({stage}): {message}")]
    Data { stage: String, message: String },
    #[error("analysis error ({stage}): {message}")]
    Analysis { stage: String, message: String },
}

impl AuditError {
    /// CLI exit code for this failure class (violations, handled by the
    /// CLI itself, use 4).
    pub fn exit_code(&self) -> i32 {
        match self {
            AuditError::Config(_) => 2,
            AuditError::Data { .. } => 3,
            AuditError::Analysis { .. } => 5,
        }
    }
}

fn data_err(stage: &str, message: impl ToString) -> AuditError {
    AuditError::Data {
        stage: stage.to_string(),
        message: message.to_string(),
    }
}

fn analysis_err(stage: &str, message: impl ToString) -> AuditError {
    AuditError::Analysis {
        stage: stage.to_string(),
        message: message.to_string(),
    }
}

// ---------------------------------------------------------------------
// Seed derivation
// ---------------------------------------------------------------------

/// Purpose indices for per-analysis seed derivation. Families are 2³²
/// apart so a per-row offset can never collide across purposes.
pub const PURPOSE_TRAIN_SPLIT: u64 = 0;
pub const PURPOSE_ROBUSTNESS: u64 = 1 << 32;
pub const PURPOSE_SURROGATE: u64 = 2 << 32;

/// Derives an independent seed from the configured base seed and a
/// purpose index, so analyses never share a random stream.
pub fn derive_seed(base: u64, purpose: u64) -> u64 {
    DetRng::substream(base, purpose).next_u64()
}

// ---------------------------------------------------------------------
// Loading and preparation
// ---------------------------------------------------------------------

/// Prefix marking CSV columns that carry externally computed class
/// probabilities for a `[predictions]` source: `proba:<label>`.
pub const PROBA_PREFIX: &str = "proba:";

/// Everything an audit needs, loaded and validated: typed features,
/// labels, a ready predictor and its predictions over the full dataset.
pub struct Prepared {
    pub config: AuditConfig,
    pub features: Dataset,
    pub labels: LabelVector,
    pub predictor: Box<dyn Predictor>,
    pub predictions: LabelVector,
    /// Number of rows the built-in model trained on; `None` for a
    /// precomputed predictions column.
    pub trained_rows: Option<usize>,
}

impl std::fmt::Debug for Prepared {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Prepared")
            .field("n_rows", &self.features.n_rows())
            .field("n_features", &self.features.n_features())
            .field("source", &source_name(&self.config.source))
            .field("trained_rows", &self.trained_rows)
            .finish_non_exhaustive()
    }
}

/// Reads the configured data (and schema sidecar) from disk and builds
/// the audit inputs.
pub fn prepare(cfg: &AuditConfig) -> Result<Prepared, AuditError> {
    let data_text = fs::read_to_string(&cfg.data_path)
        .map_err(|e| data_err("read", format!("{}: {e}", cfg.data_path.display())))?;
    let schema_text = match &cfg.schema_path {
        Some(path) => Some(
            fs::read_to_string(path)
                .map_err(|e| data_err("read", format!("{}: {e}", path.display())))?,
        ),
        None => None,
    };
    load(cfg, &data_text, schema_text.as_deref())
}

/// Builds the audit inputs from in-memory documents. Stages map to
/// failure classes: `parse` and `extract` and `validate` are data
/// errors; `model` (training) failures are analysis errors.
pub fn load(
    cfg: &AuditConfig,
    data_text: &str,
    schema_text: Option<&str>,
) -> Result<Prepared, AuditError> {
    let raw = parse_csv_raw(data_text).map_err(|e| data_err("parse", e))?;

    // -- extract: split off the labels / predictions / probability
    //    columns; everything that remains is a feature.
    let labels_index = raw.column_index(&cfg.labels_column).ok_or_else(|| {
        data_err(
            "extract",
            format!("labels column `{}` is not in the header", cfg.labels_column),
        )
    })?;
    let mut reserved = vec![labels_index];

    let predictions_index = match &cfg.source {
        PredictionSource::Column(name) => {
            let idx = raw.column_index(name).ok_or_else(|| {
                data_err(
                    "extract",
                    format!("predictions column `{name}` is not in the header"),
                )
            })?;
            reserved.push(idx);
            Some(idx)
        }
        PredictionSource::Model(_) => None,
    };

    let mut proba_columns: Vec<(String, usize)> = Vec::new();
    let mut seen_proba = BTreeSet::new();
    for (j, name) in raw.header.iter().enumerate() {
        let Some(label) = name.strip_prefix(PROBA_PREFIX) else {
            continue;
        };
        if predictions_index.is_none() {
            return Err(data_err(
                "extract",
                format!(
                    "column `{name}` carries external probabilities, which only accompany a \
                     [predictions] column; remove it or configure [predictions]"
                ),
            ));
        }
        if label.is_empty() {
            return Err(data_err(
                "extract",
                format!("probability column `{name}` names no label"),
            ));
        }
        if !seen_proba.insert(label.to_string()) {
            return Err(data_err(
                "extract",
                format!("duplicate probability column `{name}`"),
            ));
        }
        proba_columns.push((label.to_string(), j));
        reserved.push(j);
    }

    let feature_indices: Vec<usize> = (0..raw.header.len())
        .filter(|j| !reserved.contains(j))
        .collect();
    if feature_indices.is_empty() {
        return Err(data_err(
            "extract",
            "no feature columns remain after removing the labels and prediction columns",
        ));
    }
    let features_raw = raw.project(&feature_indices);

    let labels = LabelVector::new(raw.column(labels_index)).map_err(|e| data_err("extract", e))?;
    let supplied_predictions = predictions_index
        .map(|idx| LabelVector::new(raw.column(idx)))
        .transpose()
        .map_err(|e| data_err("extract", e))?;

    // -- parse the sidecar against the feature header only (labels and
    //    prediction columns have fixed roles and never need kinds).
    let schema = schema_text
        .map(|text| parse_schema_sidecar(text, &features_raw.header))
        .transpose()
        .map_err(|e| data_err("parse", e))?;

    // -- validate: type the table and check every cross-reference the
    //    config makes into it.
    let features = crate::dataset::dataset_from_raw(&features_raw, schema.as_ref())
        .map_err(|e| data_err("validate", e))?;
    let n = features.n_rows();

    match features.schema().kind_of(&cfg.protected) {
        Some(FeatureKind::Categorical) => {}
        Some(FeatureKind::Numeric) => {
            return Err(data_err(
                "validate",
                format!(
                    "protected feature `{}` is numeric; protected features must be categorical",
                    cfg.protected
                ),
            ))
        }
        None => {
            return Err(data_err(
                "validate",
                format!(
                    "protected feature `{}` is not a feature column",
                    cfg.protected
                ),
            ))
        }
    }

    // Label-based analyses need a binary problem and a resolvable
    // positive label; purely structural analyses (density, PD on a
    // multiclass model) do not.
    let needs_labels = cfg.fairness.is_some()
        || cfg
            .accountability
            .as_ref()
            .is_some_and(|a| a.performance.is_some());
    if needs_labels {
        let mut universe = labels.distinct_sorted();
        if let Some(preds) = &supplied_predictions {
            universe.extend(preds.distinct_sorted());
            universe.sort();
            universe.dedup();
        }
        if universe.len() > 2 {
            return Err(data_err(
                "validate",
                format!(
                    "fairness and performance analyses need a binary problem; found {} distinct \
                     labels ({})",
                    universe.len(),
                    universe.join(", ")
                ),
            ));
        }
        if universe.len() == 2 && !universe.iter().any(|l| l == &cfg.positive) {
            return Err(data_err(
                "validate",
                format!(
                    "positive label `{}` is neither observed label ({})",
                    cfg.positive,
                    universe.join(", ")
                ),
            ));
        }
        let needs_pairs = cfg
            .fairness
            .as_ref()
            .is_some_and(|f| !f.metrics.is_empty() || f.disparate_impact);
        if needs_pairs {
            let index =
                group_by_feature(&features, &cfg.protected).map_err(|e| data_err("validate", e))?;
            if index.len() < 2 {
                return Err(data_err(
                    "validate",
                    format!(
                        "disparity checks need at least two `{}` groups; found {}",
                        cfg.protected,
                        index.len()
                    ),
                ));
            }
        }
    }

    if let Some(a) = &cfg.accountability {
        if let Some(r) = &a.robustness {
            check_anchors("accountability.robustness", &r.anchors, n)?;
        }
    }
    if let Some(t) = &cfg.transparency {
        if let Some(s) = &t.surrogate {
            check_anchors("transparency.surrogate", &s.anchors, n)?;
        }
    }

    // -- predictions source: bind the precomputed column, or train the
    //    built-in model on a seeded split and predict the full dataset.
    let (predictor, trained_rows): (Box<dyn Predictor>, Option<usize>) = match &cfg.source {
        PredictionSource::Column(_) => {
            let predictions = supplied_predictions.expect("extracted with the column source");
            let probabilities =
                build_probabilities(&raw, &proba_columns).map_err(|e| data_err("validate", e))?;
            let p = PrecomputedPredictor::new(&features, predictions, probabilities)
                .map_err(|e| data_err("validate", e))?;
            (Box::new(p), None)
        }
        PredictionSource::Model(m) => {
            let take = ((m.train_fraction * n as f64).ceil() as usize).clamp(1, n);
            let mut order: Vec<usize> = (0..n).collect();
            DetRng::new(derive_seed(cfg.seed, PURPOSE_TRAIN_SPLIT)).shuffle(&mut order);
            order.truncate(take);
            let train = features
                .select_rows(&order)
                .map_err(|e| analysis_err("model", e))?;
            let train_labels = labels
                .select(&order)
                .map_err(|e| analysis_err("model", e))?;
            let p: Box<dyn Predictor> = match m.kind {
                ModelKind::Majority => Box::new(
                    majority_fit(&train, &train_labels).map_err(|e| analysis_err("model", e))?,
                ),
                ModelKind::Knn => Box::new(
                    knn_fit(&train, &train_labels, m.k).map_err(|e| analysis_err("model", e))?,
                ),
                ModelKind::Logistic => Box::new(
                    logistic_fit(&train, &train_labels, m.epochs, m.learning_rate)
                        .map_err(|e| analysis_err("model", e))?,
                ),
            };
            (p, Some(take))
        }
    };
    let predictions = predictor
        .predict(&features)
        .map_err(|e| analysis_err("model", e))?;

    Ok(Prepared {
        config: cfg.clone(),
        features,
        labels,
        predictor,
        predictions,
        trained_rows,
    })
}

fn check_anchors(what: &str, anchors: &[usize], n: usize) -> Result<(), AuditError> {
    for &row in anchors {
        if row >= n {
            return Err(data_err(
                "validate",
                format!("{what} anchor row {row} is out of range for {n} data rows"),
            ));
        }
    }
    Ok(())
}

/// Assembles the `proba:<label>` columns into a probability matrix, in
/// sorted label order. Returns `None` when no such columns exist.
fn build_probabilities(
    raw: &crate::dataset::RawTable,
    proba_columns: &[(String, usize)],
) -> Result<Option<ProbabilityMatrix>, String> {
    if proba_columns.is_empty() {
        return Ok(None);
    }
    let mut sorted: Vec<&(String, usize)> = proba_columns.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(sorted.len());
    for (label, j) in &sorted {
        let mut column = Vec::with_capacity(raw.records.len());
        for (i, cell) in raw.column(*j).iter().enumerate() {
            let value = parse_numeric(cell).ok_or_else(|| {
                format!("cell `{cell}` in column `proba:{label}`, row {i} is not a finite number")
            })?;
            column.push(value);
        }
        columns.push(column);
    }
    let labels: Vec<String> = sorted.iter().map(|(l, _)| l.clone()).collect();
    let rows: Vec<Vec<f64>> = (0..raw.records.len())
        .map(|i| columns.iter().map(|c| c[i]).collect())
        .collect();
    ProbabilityMatrix::new(labels, rows)
        .map(Some)
        .map_err(|e| e.to_string())
}

// ---------------------------------------------------------------------
// Deployment mode: the audit report
// ---------------------------------------------------------------------

/// The fairness pair with the widest defined gap seen anywhere in the
/// configured disparity checks.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstPair {
    pub metric: String,
    pub groups: (String, String),
    pub gap: f64,
}

/// Aggregate verdict of the fairness section: how many pairwise checks
/// failed, and the widest gap. Disparate-impact failure adds one to the
/// count but, being a ratio rather than a gap, never sets `worst`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ViolationSummary {
    pub count: usize,
    pub worst: Option<WorstPair>,
}

impl ViolationSummary {
    fn consider(&mut self, report: &DisparityReport, metric: &str) {
        if let Some((a, b, gap)) = report.worst_pair() {
            if self.worst.as_ref().is_none_or(|w| gap > w.gap) {
                self.worst = Some(WorstPair {
                    metric: metric.to_string(),
                    groups: (a, b),
                    gap,
                });
            }
        }
    }
}

/// A finished audit: the JSON document plus the violation summary the
/// CLI consults for `--fail-on-violation`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    document: Json,
    pub violations: ViolationSummary,
}

impl AuditReport {
    /// The report as a JSON string (byte-deterministic given config and
    /// data, unless a stamp was injected).
    pub fn render(&self) -> String {
        self.document.render()
    }

    pub fn document(&self) -> &Json {
        &self.document
    }
}

/// Runs the configured analyses end to end: load, predict, analyze,
/// assemble. Top-level report keys appear in the order `meta`,
/// `fairness`, `accountability`, `transparency`, `violations`, with
/// unconfigured sections omitted entirely.
pub fn run_audit(cfg: &AuditConfig) -> Result<AuditReport, AuditError> {
    audit_prepared(&prepare(cfg)?)
}

/// The analysis half of [`run_audit`], reusable when the inputs are
/// already loaded.
pub fn audit_prepared(prep: &Prepared) -> Result<AuditReport, AuditError> {
    let cfg = &prep.config;
    let mut document = Json::object();
    document.push("meta", meta_json(prep));
    let mut violations = ViolationSummary::default();
    if let Some(fcfg) = &cfg.fairness {
        let (section, tally) = fairness_section(prep, fcfg)?;
        document.push("fairness", section);
        violations = tally;
    }
    if let Some(acfg) = &cfg.accountability {
        document.push("accountability", accountability_section(prep, acfg)?);
    }
    if let Some(tcfg) = &cfg.transparency {
        document.push("transparency", transparency_section(prep, tcfg)?);
    }
    document.push("violations", violations_json(&violations));
    Ok(AuditReport {
        document,
        violations,
    })
}

fn source_name(source: &PredictionSource) -> String {
    match source {
        PredictionSource::Column(name) => format!("column:{name}"),
        PredictionSource::Model(m) => format!("model:{}", m.kind.name()),
    }
}

fn meta_json(prep: &Prepared) -> Json {
    let cfg = &prep.config;
    let mut meta = Json::object();
    meta.push("tool", Json::Str(TOOL_NAME.to_string()));
    meta.push("version", Json::Str(TOOL_VERSION.to_string()));
    meta.push("seed", Json::UInt(cfg.seed));
    meta.push("config_digest", Json::Str(cfg.digest.clone()));
    meta.push("data_digest", Json::Str(prep.features.content_digest()));
    meta.push("n_rows", Json::UInt(prep.features.n_rows() as u64));
    meta.push("n_features", Json::UInt(prep.features.n_features() as u64));
    meta.push("labels", Json::Str(cfg.labels_column.clone()));
    meta.push("protected", Json::Str(cfg.protected.clone()));
    meta.push("positive", Json::Str(cfg.positive.clone()));
    meta.push("source", Json::Str(source_name(&cfg.source)));
    meta.push(
        "trained_rows",
        match prep.trained_rows {
            Some(k) => Json::UInt(k as u64),
            None => Json::Null,
        },
    );
    if let Some(stamp) = &cfg.stamp {
        meta.push("stamp", Json::Str(stamp.clone()));
    }
    meta
}

fn pair_state_name(state: PairState) -> &'static str {
    match state {
        PairState::Fair => "fair",
        PairState::Violation => "violation",
        PairState::Indeterminate => "indeterminate",
    }
}

fn confusion_cells_json(cm: &ConfusionMatrix) -> Json {
    let mut out = Json::object();
    out.push("true_positives", Json::UInt(cm.true_positives as u64));
    out.push("false_positives", Json::UInt(cm.false_positives as u64));
    out.push("true_negatives", Json::UInt(cm.true_negatives as u64));
    out.push("false_negatives", Json::UInt(cm.false_negatives as u64));
    out
}

fn confusion_json(grouped: &GroupedConfusion) -> Json {
    let mut per_group = Json::object();
    for (group, cm) in &grouped.per_group {
        per_group.push(group, confusion_cells_json(cm));
    }
    let mut out = Json::object();
    out.push("per_group", per_group);
    out.push("pooled", confusion_cells_json(&grouped.pooled()));
    out
}

fn disparity_json(report: &DisparityReport) -> Json {
    let mut per_group = Json::object();
    for (group, rate) in &report.per_group {
        per_group.push(group, Json::opt_float(rate.value()));
    }
    let mut pairs = Vec::new();
    for (a, b, state) in report.pairs() {
        let gap = match (report.per_group[a].value(), report.per_group[b].value()) {
            (Some(x), Some(y)) => Some((x - y).abs()),
            _ => None,
        };
        let mut pair = Json::object();
        pair.push(
            "groups",
            Json::Array(vec![Json::Str(a.to_string()), Json::Str(b.to_string())]),
        );
        pair.push("state", Json::Str(pair_state_name(state).to_string()));
        pair.push("gap", Json::opt_float(gap));
        pairs.push(pair);
    }
    let mut out = Json::object();
    out.push("per_group", per_group);
    out.push("pairs", Json::Array(pairs));
    out.push("violations", Json::UInt(report.violation_count() as u64));
    out.push(
        "indeterminate",
        Json::UInt(report.indeterminate_count() as u64),
    );
    out
}

fn equalized_odds_json(report: &EqualizedOddsReport) -> Json {
    let mut out = Json::object();
    out.push("tpr", disparity_json(&report.tpr));
    out.push("fpr", disparity_json(&report.fpr));
    let mut pairs = Vec::new();
    for ((a, b), &state) in &report.combined {
        let mut pair = Json::object();
        pair.push(
            "groups",
            Json::Array(vec![Json::Str(a.clone()), Json::Str(b.clone())]),
        );
        pair.push("state", Json::Str(pair_state_name(state).to_string()));
        pairs.push(pair);
    }
    out.push("pairs", Json::Array(pairs));
    out.push("violations", Json::UInt(report.violation_count() as u64));
    out.push(
        "indeterminate",
        Json::UInt(report.indeterminate_count() as u64),
    );
    out
}

fn disparate_impact_json(di: &DisparateImpact) -> Json {
    let mut per_group = Json::object();
    for (group, rate) in &di.per_group {
        per_group.push(group, Json::Float(*rate));
    }
    let mut out = Json::object();
    out.push("ratio", Json::Float(di.ratio));
    out.push("pass", Json::Bool(di.pass));
    out.push("min_group", Json::Str(di.min_group.clone()));
    out.push("max_group", Json::Str(di.max_group.clone()));
    out.push("per_group", per_group);
    out
}

fn fairness_section(
    prep: &Prepared,
    fcfg: &FairnessConfig,
) -> Result<(Json, ViolationSummary), AuditError> {
    let stage = "fairness";
    let cfg = &prep.config;
    let grouped = grouped_confusion(
        &prep.features,
        &cfg.protected,
        &prep.labels,
        &prep.predictions,
        &cfg.positive,
    )
    .map_err(|e| analysis_err(stage, e))?;

    let mut section = Json::object();
    section.push("tolerance", Json::Float(fcfg.tolerance));
    section.push("confusion", confusion_json(&grouped));

    let mut tally = ViolationSummary::default();
    let mut metrics = Json::object();
    for request in &fcfg.metrics {
        match request {
            FairnessMetricRequest::Single(metric) => {
                let report = crate::fairness::groupwise_disparity(
                    &prep.features,
                    &cfg.protected,
                    &prep.labels,
                    &prep.predictions,
                    *metric,
                    &cfg.positive,
                    fcfg.tolerance,
                )
                .map_err(|e| analysis_err(stage, e))?;
                tally.count += report.violation_count();
                tally.consider(&report, metric.name());
                metrics.push(metric.name(), disparity_json(&report));
            }
            FairnessMetricRequest::EqualizedOdds => {
                let report = equalized_odds(
                    &prep.features,
                    &cfg.protected,
                    &prep.labels,
                    &prep.predictions,
                    &cfg.positive,
                    fcfg.tolerance,
                )
                .map_err(|e| analysis_err(stage, e))?;
                tally.count += report.violation_count();
                tally.consider(&report.tpr, "equalized_odds:tpr");
                tally.consider(&report.fpr, "equalized_odds:fpr");
                metrics.push("equalized_odds", equalized_odds_json(&report));
            }
        }
    }
    section.push("metrics", metrics);

    if fcfg.disparate_impact {
        let di = disparate_impact(
            &prep.features,
            &cfg.protected,
            &prep.predictions,
            &cfg.positive,
        )
        .map_err(|e| analysis_err(stage, e))?;
        if !di.pass {
            tally.count += 1;
        }
        section.push("disparate_impact", disparate_impact_json(&di));
    }
    if fcfg.data_bias {
        let summary = data_bias_summary(&prep.features, &cfg.protected, &prep.labels)
            .map_err(|e| analysis_err(stage, e))?;
        let mut sizes = Json::object();
        for (group, size) in &summary.group_sizes {
            sizes.push(group, Json::UInt(*size as u64));
        }
        let mut distributions = Json::object();
        for (group, dist) in &summary.label_distributions {
            let mut inner = Json::object();
            for (label, freq) in dist {
                inner.push(label, Json::Float(*freq));
            }
            distributions.push(group, inner);
        }
        let mut out = Json::object();
        out.push("group_sizes", sizes);
        out.push("label_distributions", distributions);
        out.push("max_gap", Json::Float(summary.max_gap));
        section.push("data_bias", out);
    }
    if fcfg.systemic_pairs {
        let pairs = systemic_bias_pairs(&prep.features, &cfg.protected, &prep.labels)
            .map_err(|e| analysis_err(stage, e))?;
        let mut out = Json::object();
        out.push("count", Json::UInt(pairs.len() as u64));
        out.push(
            "pairs",
            Json::Array(
                pairs
                    .iter()
                    .map(|&(i, j)| Json::Array(vec![Json::UInt(i as u64), Json::UInt(j as u64)]))
                    .collect(),
            ),
        );
        section.push("systemic_pairs", out);
    }
    Ok((section, tally))
}

fn accountability_section(
    prep: &Prepared,
    acfg: &AccountabilityConfig,
) -> Result<Json, AuditError> {
    let stage = "accountability";
    let cfg = &prep.config;
    let mut section = Json::object();

    if let Some(dcfg) = &acfg.density {
        let scorer = density_fit(&prep.features, dcfg.k).map_err(|e| analysis_err(stage, e))?;
        let mut scores = Vec::with_capacity(prep.features.n_rows());
        for row in prep.features.rows() {
            scores.push(Json::Float(
                scorer.score(row).map_err(|e| analysis_err(stage, e))?,
            ));
        }
        let mut out = Json::object();
        out.push("k", Json::UInt(dcfg.k as u64));
        out.push("normalization", Json::Float(scorer.normalization()));
        out.push("scores", Json::Array(scores));
        section.push("density", out);
    }

    if let Some(rcfg) = &acfg.robustness {
        let mut anchors = Vec::with_capacity(rcfg.anchors.len());
        for &row in &rcfg.anchors {
            let seed = derive_seed(cfg.seed, PURPOSE_ROBUSTNESS + row as u64);
            let sampler = SamplerConfig::new(rcfg.n_samples, seed).with_spread(rcfg.spread);
            let result = robustness_flip_rate(
                prep.predictor.as_ref(),
                prep.features.row(row),
                &prep.features,
                &sampler,
            )
            .map_err(|e| analysis_err(stage, e))?;
            let mut out = Json::object();
            out.push("row", Json::UInt(row as u64));
            out.push("seed", Json::UInt(seed));
            out.push("base_prediction", Json::Str(result.base_prediction));
            out.push("flip_rate", Json::Float(result.flip_rate));
            anchors.push(out);
        }
        let mut out = Json::object();
        out.push("spread", Json::Float(rcfg.spread));
        out.push("n_samples", Json::UInt(rcfg.n_samples as u64));
        out.push("anchors", Json::Array(anchors));
        section.push("robustness", out);
    }

    if let Some(pcfg) = &acfg.performance {
        let mut metrics = Json::object();
        for metric in &pcfg.metrics {
            let result = groupwise_performance(
                prep.predictor.as_ref(),
                &prep.features,
                &cfg.protected,
                &prep.labels,
                *metric,
                &cfg.positive,
            )
            .map_err(|e| analysis_err(stage, e))?;
            let mut per_group = Json::object();
            for (group, rate) in &result.per_group {
                per_group.push(group, Json::opt_float(rate.value()));
            }
            let mut out = Json::object();
            out.push("per_group", per_group);
            metrics.push(metric.name(), out);
        }
        let mut out = Json::object();
        out.push("positive", Json::Str(cfg.positive.clone()));
        out.push("metrics", metrics);
        section.push("performance", out);
    }

    Ok(section)
}

fn value_json(v: &Value) -> Json {
    match v {
        Value::Number(x) => Json::Float(*x),
        Value::Category(token) => Json::Str(token.clone()),
    }
}

fn float_array(values: &[f64]) -> Json {
    Json::Array(values.iter().map(|&v| Json::Float(v)).collect())
}

/// Runs a surrogate explanation for one data row with the canonical
/// per-row seed, so deployment reports, research tables and direct
/// library calls all agree.
pub fn surrogate_for_row(
    prep: &Prepared,
    request: &SurrogateRequest,
    row: usize,
) -> Result<SurrogateExplanation, AuditError> {
    let seed = derive_seed(prep.config.seed, PURPOSE_SURROGATE + row as u64);
    let cfg = SurrogateConfig {
        sampler: SamplerConfig::new(request.n_samples, seed).with_spread(request.spread),
        kernel_width: request.kernel_width,
        ridge_lambda: request.ridge_lambda,
    };
    surrogate_explain(
        prep.predictor.as_ref(),
        prep.features.row(row),
        &prep.features,
        &cfg,
        &prep.config.positive,
    )
    .map_err(|e| analysis_err("transparency", e))
}

fn transparency_section(prep: &Prepared, tcfg: &TransparencyConfig) -> Result<Json, AuditError> {
    let stage = "transparency";
    let cfg = &prep.config;
    let grid_cfg = GridConfig {
        resolution: tcfg.grid_resolution,
    };
    let mut section = Json::object();
    section.push("grid_resolution", Json::UInt(tcfg.grid_resolution as u64));

    if !tcfg.pd_features.is_empty() {
        let mut out = Json::object();
        for feature in &tcfg.pd_features {
            let pd = partial_dependence(
                prep.predictor.as_ref(),
                &prep.features,
                feature,
                &grid_cfg,
                &cfg.positive,
            )
            .map_err(|e| analysis_err(stage, e))?;
            let mut f = Json::object();
            f.push(
                "grid",
                Json::Array(pd.grid.points.iter().map(value_json).collect()),
            );
            f.push("curve", float_array(&pd.curve));
            out.push(feature, f);
        }
        section.push("pd", out);
    }

    if !tcfg.ice_features.is_empty() {
        let mut out = Json::object();
        for feature in &tcfg.ice_features {
            let result = ice(
                prep.predictor.as_ref(),
                &prep.features,
                feature,
                &grid_cfg,
                &cfg.positive,
            )
            .map_err(|e| analysis_err(stage, e))?;
            let mut f = Json::object();
            f.push(
                "grid",
                Json::Array(result.grid.points.iter().map(value_json).collect()),
            );
            f.push(
                "curves",
                Json::Array(result.curves.iter().map(|c| float_array(c)).collect()),
            );
            out.push(feature, f);
        }
        section.push("ice", out);
    }

    if let Some(request) = &tcfg.surrogate {
        let mut anchors = Vec::with_capacity(request.anchors.len());
        for &row in &request.anchors {
            let explanation = surrogate_for_row(prep, request, row)?;
            let mut out = Json::object();
            out.push("row", Json::UInt(row as u64));
            out.push("seed", Json::UInt(explanation.seed));
            out.push("kernel_width", Json::Float(explanation.kernel_width));
            out.push("ridge_lambda", Json::Float(request.ridge_lambda));
            out.push(
                "features",
                Json::Array(
                    explanation
                        .feature_names
                        .iter()
                        .map(|name| Json::Str(name.clone()))
                        .collect(),
                ),
            );
            out.push("weights", float_array(&explanation.weights));
            out.push("intercept", Json::Float(explanation.intercept));
            out.push("fidelity", Json::opt_float(explanation.fidelity));
            out.push(
                "constant_response",
                Json::Bool(explanation.constant_response),
            );
            anchors.push(out);
        }
        let mut out = Json::object();
        out.push("n_samples", Json::UInt(request.n_samples as u64));
        out.push("anchors", Json::Array(anchors));
        section.push("surrogate", out);
    }

    Ok(section)
}

fn violations_json(summary: &ViolationSummary) -> Json {
    let mut out = Json::object();
    out.push("count", Json::UInt(summary.count as u64));
    out.push(
        "worst",
        match &summary.worst {
            None => Json::Null,
            Some(w) => {
                let mut worst = Json::object();
                worst.push("metric", Json::Str(w.metric.clone()));
                worst.push(
                    "groups",
                    Json::Array(vec![
                        Json::Str(w.groups.0.clone()),
                        Json::Str(w.groups.1.clone()),
                    ]),
                );
                worst.push("gap", Json::Float(w.gap));
                worst
            }
        },
    );
    out
}

// ---------------------------------------------------------------------
// Research mode: plot tables
// ---------------------------------------------------------------------

/// Emits plot tables for every configured transparency request. Errors
/// with a config complaint when the config requests nothing to plot.
pub fn run_research(cfg: &AuditConfig) -> Result<PlotBundle, AuditError> {
    research_prepared(&prepare(cfg)?)
}

/// The table-building half of [`run_research`].
pub fn research_prepared(prep: &Prepared) -> Result<PlotBundle, AuditError> {
    let cfg = &prep.config;
    let empty = || {
        AuditError::Config(
            "research mode needs at least one visualisation request \
             (transparency pd, ice or surrogate)"
                .to_string(),
        )
    };
    let tcfg = cfg.transparency.as_ref().ok_or_else(empty)?;
    if tcfg.pd_features.is_empty() && tcfg.ice_features.is_empty() && tcfg.surrogate.is_none() {
        return Err(empty());
    }
    let stage = "transparency";
    let grid_cfg = GridConfig {
        resolution: tcfg.grid_resolution,
    };
    let mut bundle = PlotBundle::default();
    for feature in &tcfg.pd_features {
        let pd = partial_dependence(
            prep.predictor.as_ref(),
            &prep.features,
            feature,
            &grid_cfg,
            &cfg.positive,
        )
        .map_err(|e| analysis_err(stage, e))?;
        bundle.tables.push(plots::pd_table(&pd));
    }
    for feature in &tcfg.ice_features {
        let result = ice(
            prep.predictor.as_ref(),
            &prep.features,
            feature,
            &grid_cfg,
            &cfg.positive,
        )
        .map_err(|e| analysis_err(stage, e))?;
        let pd = pd_from_ice(&result);
        bundle.tables.push(plots::ice_table(&result, &pd));
    }
    if let Some(request) = &tcfg.surrogate {
        for &row in &request.anchors {
            let explanation = surrogate_for_row(prep, request, row)?;
            bundle.tables.push(plots::surrogate_table(
                row,
                &explanation.feature_names,
                &explanation.weights,
            ));
        }
    }
    Ok(bundle)
}
