//! Group fairness metrics over predictions and bias checks over data:
//! confusion-matrix rates per protected group, pairwise disparity grids,
//! the four-fifths disparate-impact rule, label-distribution bias and
//! systemic-bias record pairs.
//!
//! All metrics are binary; multi-class problems reduce to one-vs-rest
//! against a caller-chosen positive label. Rates with zero denominators
//! are reported as [`Rate::Undefined`] rather than dropped or zeroed, and
//! group pairs involving them are marked indeterminate.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::dataset::{Dataset, DatasetError, LabelVector, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FairnessError {
    #[error("label vectors have lengths {left} and {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("labels span {0} distinct values, metrics are binary")]
    NotBinary(usize),
    #[error("positive label `{0}` does not appear in the label universe")]
    UnknownPositiveLabel(String),
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("disparity tolerance must be finite and non-negative, got {0}")]
    InvalidTolerance(f64),
    #[error("feature `{0}` has a single group; comparison needs at least two")]
    SingleGroup(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Binary confusion counts against one positive label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
    pub positive_label: String,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.true_positives + self.false_positives + self.true_negatives + self.false_negatives
    }
}

/// Counts true/false positives/negatives of `y_pred` against `y_true`.
/// The pooled label universe (truth ∪ predictions) may contain at most
/// two labels; `positive` must be one of them unless the universe is a
/// single non-positive label (an all-negative problem).
pub fn confusion_matrix(
    y_true: &LabelVector,
    y_pred: &LabelVector,
    positive: &str,
) -> Result<ConfusionMatrix, FairnessError> {
    if y_true.len() != y_pred.len() {
        return Err(FairnessError::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    let mut universe = y_true.distinct_sorted();
    universe.extend(y_pred.distinct_sorted());
    universe.sort();
    universe.dedup();
    if universe.len() > 2 {
        return Err(FairnessError::NotBinary(universe.len()));
    }
    if universe.len() == 2 && !universe.iter().any(|l| l == positive) {
        return Err(FairnessError::UnknownPositiveLabel(positive.to_string()));
    }
    let mut cm = ConfusionMatrix {
        true_positives: 0,
        false_positives: 0,
        true_negatives: 0,
        false_negatives: 0,
        positive_label: positive.to_string(),
    };
    for (truth, pred) in y_true.iter().zip(y_pred.iter()) {
        match (truth == positive, pred == positive) {
            (true, true) => cm.true_positives += 1,
            (true, false) => cm.false_negatives += 1,
            (false, true) => cm.false_positives += 1,
            (false, false) => cm.true_negatives += 1,
        }
    }
    Ok(cm)
}

/// A rate whose denominator may be empty. `Undefined` is a value, not an
/// error: degenerate groups must stay visible in reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    Defined(f64),
    Undefined,
}

impl Rate {
    fn from_counts(numerator: usize, denominator: usize) -> Rate {
        if denominator == 0 {
            Rate::Undefined
        } else {
            Rate::Defined(numerator as f64 / denominator as f64)
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Rate::Defined(v) => Some(v),
            Rate::Undefined => None,
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, Rate::Defined(_))
    }
}

/// The standard rates of one confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSet {
    pub tpr: Rate,
    pub fpr: Rate,
    pub ppv: Rate,
    pub accuracy: Rate,
    pub positive_rate: Rate,
}

/// tpr = tp/(tp+fn), fpr = fp/(fp+tn), ppv = tp/(tp+fp),
/// accuracy = (tp+tn)/n, positive_rate = (tp+fp)/n.
pub fn rates(cm: &ConfusionMatrix) -> RateSet {
    let n = cm.total();
    RateSet {
        tpr: Rate::from_counts(cm.true_positives, cm.true_positives + cm.false_negatives),
        fpr: Rate::from_counts(cm.false_positives, cm.false_positives + cm.true_negatives),
        ppv: Rate::from_counts(cm.true_positives, cm.true_positives + cm.false_positives),
        accuracy: Rate::from_counts(cm.true_positives + cm.true_negatives, n),
        positive_rate: Rate::from_counts(cm.true_positives + cm.false_positives, n),
    }
}

/// Per-protected-group confusion matrices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupedConfusion {
    pub grouping_feature: String,
    pub per_group: BTreeMap<String, ConfusionMatrix>,
}

impl GroupedConfusion {
    /// Cell-wise sum over groups; equals the pooled matrix.
    pub fn pooled(&self) -> ConfusionMatrix {
        let mut pooled = ConfusionMatrix {
            true_positives: 0,
            false_positives: 0,
            true_negatives: 0,
            false_negatives: 0,
            positive_label: self
                .per_group
                .values()
                .next()
                .map(|cm| cm.positive_label.clone())
                .unwrap_or_default(),
        };
        for cm in self.per_group.values() {
            pooled.true_positives += cm.true_positives;
            pooled.false_positives += cm.false_positives;
            pooled.true_negatives += cm.true_negatives;
            pooled.false_negatives += cm.false_negatives;
        }
        pooled
    }
}

fn check_lengths(d: &Dataset, v: &LabelVector) -> Result<(), FairnessError> {
    if v.len() != d.n_rows() {
        return Err(FairnessError::LengthMismatch {
            left: d.n_rows(),
            right: v.len(),
        });
    }
    Ok(())
}

/// Splits the confusion matrix by the groups of a categorical feature.
/// Binarity is checked once on the pooled label universe, so a group
/// seeing only one label is fine.
pub fn grouped_confusion(
    d: &Dataset,
    protected: &str,
    y_true: &LabelVector,
    y_pred: &LabelVector,
    positive: &str,
) -> Result<GroupedConfusion, FairnessError> {
    check_lengths(d, y_true)?;
    check_lengths(d, y_pred)?;
    // Pooled validation; the counting below never fails after this.
    confusion_matrix(y_true, y_pred, positive)?;
    let index = crate::dataset::group_by_feature(d, protected)?;
    let mut per_group = BTreeMap::new();
    for (group, rows) in index.groups() {
        let truth = y_true.select(rows)?;
        let pred = y_pred.select(rows)?;
        per_group.insert(group.clone(), confusion_matrix(&truth, &pred, positive)?);
    }
    Ok(GroupedConfusion {
        grouping_feature: protected.to_string(),
        per_group,
    })
}

/// One of the five groupwise rates a disparity report can compare.
/// `tpr` is equal opportunity, `positive_rate` demographic parity and
/// `ppv` predictive parity under their usual names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisparityMetric {
    Tpr,
    Fpr,
    PositiveRate,
    Ppv,
    Accuracy,
}

impl DisparityMetric {
    pub fn parse(name: &str) -> Result<Self, FairnessError> {
        match name {
            "tpr" | "equal_opportunity" => Ok(DisparityMetric::Tpr),
            "fpr" => Ok(DisparityMetric::Fpr),
            "positive_rate" | "demographic_parity" => Ok(DisparityMetric::PositiveRate),
            "ppv" | "predictive_parity" => Ok(DisparityMetric::Ppv),
            "accuracy" | "accuracy_equality" => Ok(DisparityMetric::Accuracy),
            other => Err(FairnessError::UnknownMetric(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DisparityMetric::Tpr => "tpr",
            DisparityMetric::Fpr => "fpr",
            DisparityMetric::PositiveRate => "positive_rate",
            DisparityMetric::Ppv => "ppv",
            DisparityMetric::Accuracy => "accuracy",
        }
    }

    fn extract(self, rs: &RateSet) -> Rate {
        match self {
            DisparityMetric::Tpr => rs.tpr,
            DisparityMetric::Fpr => rs.fpr,
            DisparityMetric::PositiveRate => rs.positive_rate,
            DisparityMetric::Ppv => rs.ppv,
            DisparityMetric::Accuracy => rs.accuracy,
        }
    }
}

/// Default tolerance for pairwise rate gaps.
pub const DEFAULT_DISPARITY_TOLERANCE: f64 = 0.2;

/// Verdict for one group pair: the gap exceeds the tolerance
/// (`Violation`), does not (`Fair`), or cannot be evaluated because a
/// rate is undefined (`Indeterminate`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairState {
    Fair,
    Violation,
    Indeterminate,
}

/// Per-group values of one metric plus the pairwise violation grid.
/// The grid is stored as its upper triangle; [`DisparityReport::state`]
/// answers symmetric queries and reports the diagonal as fair.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityReport {
    pub metric: String,
    pub tolerance: f64,
    pub per_group: BTreeMap<String, Rate>,
    pairs: BTreeMap<(String, String), PairState>,
}

impl DisparityReport {
    fn build(metric: String, tolerance: f64, per_group: BTreeMap<String, Rate>) -> DisparityReport {
        let names: Vec<&String> = per_group.keys().collect();
        let mut pairs = BTreeMap::new();
        for (i, a) in names.iter().enumerate() {
            for b in names.iter().skip(i + 1) {
                let state = match (per_group[*a], per_group[*b]) {
                    (Rate::Defined(x), Rate::Defined(y)) => {
                        if (x - y).abs() > tolerance {
                            PairState::Violation
                        } else {
                            PairState::Fair
                        }
                    }
                    _ => PairState::Indeterminate,
                };
                pairs.insert(((*a).clone(), (*b).clone()), state);
            }
        }
        DisparityReport {
            metric,
            tolerance,
            per_group,
            pairs,
        }
    }

    /// Verdict for a pair of groups; `None` if either name is unknown.
    pub fn state(&self, g: &str, h: &str) -> Option<PairState> {
        if !self.per_group.contains_key(g) || !self.per_group.contains_key(h) {
            return None;
        }
        if g == h {
            return Some(PairState::Fair);
        }
        let key = if g < h {
            (g.to_string(), h.to_string())
        } else {
            (h.to_string(), g.to_string())
        };
        self.pairs.get(&key).copied()
    }

    /// Upper-triangle pairs in sorted order.
    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str, PairState)> {
        self.pairs
            .iter()
            .map(|((a, b), s)| (a.as_str(), b.as_str(), *s))
    }

    pub fn violation_count(&self) -> usize {
        self.pairs
            .values()
            .filter(|s| **s == PairState::Violation)
            .count()
    }

    pub fn indeterminate_count(&self) -> usize {
        self.pairs
            .values()
            .filter(|s| **s == PairState::Indeterminate)
            .count()
    }

    /// Pair with the widest defined gap, with the gap value.
    pub fn worst_pair(&self) -> Option<(String, String, f64)> {
        let mut worst: Option<(String, String, f64)> = None;
        for (a, b) in self.pairs.keys() {
            if let (Rate::Defined(x), Rate::Defined(y)) = (self.per_group[a], self.per_group[b]) {
                let gap = (x - y).abs();
                if worst.as_ref().is_none_or(|(_, _, g)| gap > *g) {
                    worst = Some((a.clone(), b.clone(), gap));
                }
            }
        }
        worst
    }
}

/// Compares one rate across the groups of a protected feature. Every
/// unordered group pair is checked against `tolerance`; undefined rates
/// make their pairs indeterminate rather than silently fair.
pub fn groupwise_disparity(
    d: &Dataset,
    protected: &str,
    y_true: &LabelVector,
    y_pred: &LabelVector,
    metric: DisparityMetric,
    positive: &str,
    tolerance: f64,
) -> Result<DisparityReport, FairnessError> {
    // Infinity is legal (it disables the check); NaN and negatives are not.
    if tolerance.is_nan() || tolerance < 0.0 {
        return Err(FairnessError::InvalidTolerance(tolerance));
    }
    let grouped = grouped_confusion(d, protected, y_true, y_pred, positive)?;
    let per_group = grouped
        .per_group
        .iter()
        .map(|(g, cm)| (g.clone(), metric.extract(&rates(cm))))
        .collect();
    Ok(DisparityReport::build(
        metric.name().to_string(),
        tolerance,
        per_group,
    ))
}

/// Equalized odds: the conjunction of the tpr and fpr disparity reports.
/// A pair violates if it violates on either rate; if neither rate
/// violates but one is indeterminate, the pair is indeterminate.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualizedOddsReport {
    pub tpr: DisparityReport,
    pub fpr: DisparityReport,
    pub combined: BTreeMap<(String, String), PairState>,
}

impl EqualizedOddsReport {
    pub fn violation_count(&self) -> usize {
        self.combined
            .values()
            .filter(|s| **s == PairState::Violation)
            .count()
    }

    pub fn indeterminate_count(&self) -> usize {
        self.combined
            .values()
            .filter(|s| **s == PairState::Indeterminate)
            .count()
    }
}

pub fn equalized_odds(
    d: &Dataset,
    protected: &str,
    y_true: &LabelVector,
    y_pred: &LabelVector,
    positive: &str,
    tolerance: f64,
) -> Result<EqualizedOddsReport, FairnessError> {
    let tpr = groupwise_disparity(
        d,
        protected,
        y_true,
        y_pred,
        DisparityMetric::Tpr,
        positive,
        tolerance,
    )?;
    let fpr = groupwise_disparity(
        d,
        protected,
        y_true,
        y_pred,
        DisparityMetric::Fpr,
        positive,
        tolerance,
    )?;
    let mut combined = BTreeMap::new();
    for ((a, b), &t) in tpr.pairs.iter() {
        let f = fpr.pairs[&(a.clone(), b.clone())];
        let state = match (t, f) {
            (PairState::Violation, _) | (_, PairState::Violation) => PairState::Violation,
            (PairState::Indeterminate, _) | (_, PairState::Indeterminate) => {
                PairState::Indeterminate
            }
            (PairState::Fair, PairState::Fair) => PairState::Fair,
        };
        combined.insert((a.clone(), b.clone()), state);
    }
    Ok(EqualizedOddsReport { tpr, fpr, combined })
}

/// Four-fifths rule result. The ratio compares the smallest groupwise
/// positive-prediction rate to the largest.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparateImpact {
    pub ratio: f64,
    pub pass: bool,
    /// Group attaining the smallest rate (first in sorted order on ties).
    pub min_group: String,
    /// Group attaining the largest rate (first in sorted order on ties).
    pub max_group: String,
    pub per_group: BTreeMap<String, f64>,
}

/// Computes min-rate / max-rate over groups and applies the inclusive
/// four-fifths threshold. Rates are compared and the threshold applied
/// in exact integer arithmetic, so a ratio that is exactly 4/5 passes
/// regardless of how the individual rates round in floating point. When
/// no group has any positive prediction the ratio is defined as 1.
pub fn disparate_impact(
    d: &Dataset,
    protected: &str,
    y_pred: &LabelVector,
    positive: &str,
) -> Result<DisparateImpact, FairnessError> {
    check_lengths(d, y_pred)?;
    let index = crate::dataset::group_by_feature(d, protected)?;
    if index.len() < 2 {
        return Err(FairnessError::SingleGroup(protected.to_string()));
    }
    // Groupwise positive counts; rates are positives/size as exact
    // integer fractions.
    let mut counts: Vec<(String, u128, u128)> = Vec::new();
    for (group, rows) in index.groups() {
        let positives = rows.iter().filter(|&&i| y_pred.get(i) == positive).count();
        counts.push((group.clone(), positives as u128, rows.len() as u128));
    }
    // min/max by cross-multiplied comparison: a/b < c/d ⇔ a·d < c·b.
    let mut min = 0usize;
    let mut max = 0usize;
    for i in 1..counts.len() {
        if counts[i].1 * counts[min].2 < counts[min].1 * counts[i].2 {
            min = i;
        }
        if counts[i].1 * counts[max].2 > counts[max].1 * counts[i].2 {
            max = i;
        }
    }
    let per_group = counts
        .iter()
        .map(|(g, p, n)| (g.clone(), *p as f64 / *n as f64))
        .collect();
    let (min_group, pos_min, n_min) = counts[min].clone();
    let (max_group, pos_max, n_max) = counts[max].clone();
    let (ratio, pass) = if pos_max == 0 {
        (1.0, true)
    } else {
        // ratio = (pos_min/n_min) / (pos_max/n_max); both the value and
        // the 4/5 test come from the integer products.
        let num = pos_min * n_max;
        let den = pos_max * n_min;
        (num as f64 / den as f64, 5 * num >= 4 * den)
    };
    Ok(DisparateImpact {
        ratio,
        pass,
        min_group,
        max_group,
        per_group,
    })
}

/// Group sizes, per-group label distributions over the pooled label set,
/// and the largest pairwise frequency gap.
#[derive(Debug, Clone, PartialEq)]
pub struct DataBiasSummary {
    pub feature: String,
    pub group_sizes: BTreeMap<String, usize>,
    /// group → label → empirical frequency; every group carries an entry
    /// for every pooled label (0 when absent), so rows are comparable.
    pub label_distributions: BTreeMap<String, BTreeMap<String, f64>>,
    /// max over labels ℓ and group pairs (g,h) of |freq_g(ℓ) − freq_h(ℓ)|.
    pub max_gap: f64,
}

/// Summarizes how the label mix differs across the groups of a
/// categorical feature, before any model enters the picture.
pub fn data_bias_summary(
    d: &Dataset,
    protected: &str,
    labels: &LabelVector,
) -> Result<DataBiasSummary, FairnessError> {
    check_lengths(d, labels)?;
    let index = crate::dataset::group_by_feature(d, protected)?;
    let universe = labels.distinct_sorted();
    let mut group_sizes = BTreeMap::new();
    let mut label_distributions = BTreeMap::new();
    for (group, rows) in index.groups() {
        group_sizes.insert(group.clone(), rows.len());
        let mut dist: BTreeMap<String, f64> = universe.iter().map(|l| (l.clone(), 0.0)).collect();
        for &i in rows {
            *dist.get_mut(labels.get(i)).expect("pooled universe") += 1.0;
        }
        for freq in dist.values_mut() {
            *freq /= rows.len() as f64;
        }
        label_distributions.insert(group.clone(), dist);
    }
    let mut max_gap = 0.0f64;
    let groups: Vec<&String> = label_distributions.keys().collect();
    for (i, g) in groups.iter().enumerate() {
        for h in groups.iter().skip(i + 1) {
            for label in &universe {
                let gap = (label_distributions[*g][label] - label_distributions[*h][label]).abs();
                max_gap = max_gap.max(gap);
            }
        }
    }
    Ok(DataBiasSummary {
        feature: protected.to_string(),
        group_sizes,
        label_distributions,
        max_gap,
    })
}

/// Finds all row pairs (i < j) that agree exactly on every non-protected
/// feature, differ on the protected feature, and carry different labels
/// — records that look like the same case decided differently. Pairs
/// come back lexicographically sorted.
pub fn systemic_bias_pairs(
    d: &Dataset,
    protected: &str,
    labels: &LabelVector,
) -> Result<Vec<(usize, usize)>, FairnessError> {
    check_lengths(d, labels)?;
    let p = d
        .schema()
        .index_of(protected)
        .ok_or_else(|| DatasetError::UnknownFeature(protected.to_string()))?;
    let others: Vec<usize> = (0..d.n_features()).filter(|&j| j != p).collect();
    let same_others = |a: &[Value], b: &[Value]| others.iter().all(|&j| a[j] == b[j]);
    let mut pairs = Vec::new();
    for i in 0..d.n_rows() {
        for j in i + 1..d.n_rows() {
            let (a, b) = (d.row(i), d.row(j));
            if same_others(a, b) && a[p] != b[p] && labels.get(i) != labels.get(j) {
                pairs.push((i, j));
            }
        }
    }
    Ok(pairs)
}
