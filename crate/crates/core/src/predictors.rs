//! The predictor contract consumed by every analytics operation, plus
//! built-in reference models (majority class, k-NN, logistic regression)
//! and ingestion of precomputed predictions for externally trained
//! models.
//!
//! A predictor exposes `predict` and, optionally, `predict_proba`. When
//! probabilities exist they must form a distribution over the trained
//! label set in sorted label order, and the argmax of each row must equal
//! the predicted label, ties resolved towards the earlier sorted label.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::blocks::{mixed_distance, numeric_ranges};
use crate::dataset::{Dataset, FeatureKind, LabelVector, Schema, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredictorError {
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("labels have {labels} entries, training data has {rows} rows")]
    LabelMismatch { rows: usize, labels: usize },
    #[error("k = {k} exceeds the {n} training rows")]
    KTooLarge { k: usize, n: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("expected exactly 2 distinct labels, found {0}")]
    NotBinary(usize),
    #[error("dataset has no numeric representation to train on")]
    NoNumericRepresentation,
    #[error("predictions do not belong to this dataset: {0}")]
    WrongDataset(String),
    #[error("invalid probabilities: {0}")]
    InvalidProbabilities(String),
    #[error("distance: {0}")]
    Distance(String),
}

/// n_rows × n_labels grid of class probabilities. Columns follow the
/// sorted trained label order; every row is a distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix {
    labels: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl ProbabilityMatrix {
    /// Validates shape, label ordering, entry range and row normalization
    /// (sums within 1e-9 of 1).
    pub fn new(labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, PredictorError> {
        if labels.is_empty() {
            return Err(PredictorError::InvalidProbabilities(
                "no label columns".to_string(),
            ));
        }
        if !labels.windows(2).all(|w| w[0] < w[1]) {
            return Err(PredictorError::InvalidProbabilities(
                "label columns must be sorted and distinct".to_string(),
            ));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != labels.len() {
                return Err(PredictorError::InvalidProbabilities(format!(
                    "row {i} has {} entries, expected {}",
                    row.len(),
                    labels.len()
                )));
            }
            let mut sum = 0.0;
            for &p in row {
                if !(0.0..=1.0).contains(&p) {
                    return Err(PredictorError::InvalidProbabilities(format!(
                        "row {i} contains {p}, outside [0,1]"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(PredictorError::InvalidProbabilities(format!(
                    "row {i} sums to {sum}"
                )));
            }
        }
        Ok(ProbabilityMatrix { labels, rows })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn column_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Per-row argmax labels; ties go to the earlier sorted label.
    pub fn argmax_labels(&self) -> LabelVector {
        let labels = self
            .rows
            .iter()
            .map(|row| {
                let mut best = 0;
                for (j, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = j;
                    }
                }
                self.labels[best].clone()
            })
            .collect();
        LabelVector::new(labels).expect("matrix rows are non-empty")
    }
}

/// Trained model interface. Implementations are immutable and pure, so
/// they are safe to share across concurrent callers.
pub trait Predictor {
    /// Sorted distinct label set seen at fit time.
    fn trained_labels(&self) -> &[String];

    /// One label per input row, each drawn from the trained label set.
    fn predict(&self, d: &Dataset) -> Result<LabelVector, PredictorError>;

    /// Class probabilities, or `None` when the model cannot score.
    fn predict_proba(&self, d: &Dataset) -> Result<Option<ProbabilityMatrix>, PredictorError>;
}

fn check_fit_inputs(training: &Dataset, labels: &LabelVector) -> Result<(), PredictorError> {
    if labels.len() != training.n_rows() {
        return Err(PredictorError::LabelMismatch {
            rows: training.n_rows(),
            labels: labels.len(),
        });
    }
    Ok(())
}

fn check_query_schema(trained: &Schema, query: &Schema) -> Result<(), PredictorError> {
    if trained != query {
        return Err(PredictorError::SchemaMismatch(
            "query schema differs from training schema".to_string(),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------
// Majority-class predictor
// ---------------------------------------------------------------------

/// Predicts the most frequent training label everywhere; probabilities
/// are the empirical label frequencies.
#[derive(Debug, Clone)]
pub struct MajorityPredictor {
    labels: Vec<String>,
    frequencies: Vec<f64>,
    mode: String,
}

/// Fits the majority-class baseline. Frequency ties resolve to the
/// earlier sorted label.
pub fn majority_fit(
    training: &Dataset,
    labels: &LabelVector,
) -> Result<MajorityPredictor, PredictorError> {
    check_fit_inputs(training, labels)?;
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels.iter() {
        *counts.entry(l).or_insert(0) += 1;
    }
    let n = labels.len() as f64;
    let label_set: Vec<String> = counts.keys().map(|s| s.to_string()).collect();
    let frequencies: Vec<f64> = counts.values().map(|&c| c as f64 / n).collect();
    // First entry reaching the top count wins, which in a BTreeMap is
    // the earliest sorted label.
    let top = counts
        .values()
        .max()
        .copied()
        .expect("labels are non-empty");
    let mode = counts
        .iter()
        .find(|(_, &c)| c == top)
        .map(|(l, _)| l.to_string())
        .expect("labels are non-empty");
    Ok(MajorityPredictor {
        labels: label_set,
        frequencies,
        mode,
    })
}

impl Predictor for MajorityPredictor {
    fn trained_labels(&self) -> &[String] {
        &self.labels
    }

    fn predict(&self, d: &Dataset) -> Result<LabelVector, PredictorError> {
        LabelVector::new(vec![self.mode.clone(); d.n_rows()])
            .map_err(|e| PredictorError::EmptyInput(e.to_string()))
    }

    fn predict_proba(&self, d: &Dataset) -> Result<Option<ProbabilityMatrix>, PredictorError> {
        let rows = vec![self.frequencies.clone(); d.n_rows()];
        Ok(Some(ProbabilityMatrix::new(self.labels.clone(), rows)?))
    }
}

// ---------------------------------------------------------------------
// k-nearest-neighbour predictor
// ---------------------------------------------------------------------

/// Majority vote among the k nearest training rows under the mixed
/// numeric/categorical distance. Distance ties resolve to the lower
/// training-row index, vote ties to the earlier sorted label.
#[derive(Debug, Clone)]
pub struct KnnPredictor {
    training: Dataset,
    training_labels: LabelVector,
    label_set: Vec<String>,
    ranges: BTreeMap<String, (f64, f64)>,
    k: usize,
}

pub fn knn_fit(
    training: &Dataset,
    labels: &LabelVector,
    k: usize,
) -> Result<KnnPredictor, PredictorError> {
    check_fit_inputs(training, labels)?;
    if k == 0 {
        return Err(PredictorError::InvalidHyperparameter(
            "k must be at least 1".to_string(),
        ));
    }
    if k > training.n_rows() {
        return Err(PredictorError::KTooLarge {
            k,
            n: training.n_rows(),
        });
    }
    Ok(KnnPredictor {
        training: training.clone(),
        training_labels: labels.clone(),
        label_set: labels.distinct_sorted(),
        ranges: numeric_ranges(training),
        k,
    })
}

impl KnnPredictor {
    /// Vote counts over the sorted label set for one query row.
    fn votes(&self, query: &[Value]) -> Result<Vec<usize>, PredictorError> {
        let mut order: Vec<(f64, usize)> = Vec::with_capacity(self.training.n_rows());
        for (i, row) in self.training.rows().enumerate() {
            let dist = mixed_distance(&self.training, query, row, &self.ranges)
                .map_err(|e| PredictorError::Distance(e.to_string()))?;
            order.push((dist, i));
        }
        order.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .expect("distances are finite")
                .then(a.1.cmp(&b.1))
        });
        let mut votes = vec![0usize; self.label_set.len()];
        for &(_, i) in order.iter().take(self.k) {
            let label = self.training_labels.get(i);
            let slot = self
                .label_set
                .iter()
                .position(|l| l == label)
                .expect("training label in label set");
            votes[slot] += 1;
        }
        Ok(votes)
    }
}

impl Predictor for KnnPredictor {
    fn trained_labels(&self) -> &[String] {
        &self.label_set
    }

    fn predict(&self, d: &Dataset) -> Result<LabelVector, PredictorError> {
        check_query_schema(self.training.schema(), d.schema())?;
        let mut out = Vec::with_capacity(d.n_rows());
        for row in d.rows() {
            let votes = self.votes(row)?;
            let mut best = 0;
            for (j, &v) in votes.iter().enumerate() {
                if v > votes[best] {
                    best = j;
                }
            }
            out.push(self.label_set[best].clone());
        }
        LabelVector::new(out).map_err(|e| PredictorError::EmptyInput(e.to_string()))
    }

    fn predict_proba(&self, d: &Dataset) -> Result<Option<ProbabilityMatrix>, PredictorError> {
        check_query_schema(self.training.schema(), d.schema())?;
        let mut rows = Vec::with_capacity(d.n_rows());
        for row in d.rows() {
            let votes = self.votes(row)?;
            rows.push(votes.iter().map(|&v| v as f64 / self.k as f64).collect());
        }
        Ok(Some(ProbabilityMatrix::new(self.label_set.clone(), rows)?))
    }
}

// ---------------------------------------------------------------------
// Logistic regression
// ---------------------------------------------------------------------

/// How a fitted logistic model turns dataset rows into feature vectors:
/// numeric columns pass through, categorical columns become indicators
/// over the tokens seen in training (unseen tokens encode as all zeros).
#[derive(Debug, Clone)]
enum PlanColumn {
    Numeric(usize),
    Indicator(usize, String),
}

#[derive(Debug, Clone)]
struct EncodingPlan {
    columns: Vec<PlanColumn>,
}

impl EncodingPlan {
    fn from_training(d: &Dataset) -> Self {
        let mut columns = Vec::new();
        for (j, feature) in d.schema().features().iter().enumerate() {
            match feature.kind {
                FeatureKind::Numeric => columns.push(PlanColumn::Numeric(j)),
                FeatureKind::Categorical => {
                    let mut tokens: Vec<String> = d
                        .column(j)
                        .map(|v| v.as_category().expect("kind checked").to_string())
                        .collect();
                    tokens.sort();
                    tokens.dedup();
                    for t in tokens {
                        columns.push(PlanColumn::Indicator(j, t));
                    }
                }
            }
        }
        EncodingPlan { columns }
    }

    fn encode(&self, row: &[Value]) -> Vec<f64> {
        self.columns
            .iter()
            .map(|c| match c {
                PlanColumn::Numeric(j) => row[*j].as_number().expect("kind checked"),
                PlanColumn::Indicator(j, token) => {
                    if row[*j].as_category() == Some(token.as_str()) {
                        1.0
                    } else {
                        0.0
                    }
                }
            })
            .collect()
    }
}

/// Binary logistic regression trained by full-batch gradient descent on
/// the log-loss, starting from the zero vector. The positive class for
/// the sigmoid is the later of the two sorted labels.
#[derive(Debug, Clone)]
pub struct LogisticPredictor {
    schema: Schema,
    plan: EncodingPlan,
    labels: Vec<String>,
    coefficients: Vec<f64>,
    bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn logistic_fit(
    training: &Dataset,
    labels: &LabelVector,
    epochs: usize,
    learning_rate: f64,
) -> Result<LogisticPredictor, PredictorError> {
    check_fit_inputs(training, labels)?;
    if epochs == 0 {
        return Err(PredictorError::InvalidHyperparameter(
            "epochs must be at least 1".to_string(),
        ));
    }
    if learning_rate <= 0.0 || !learning_rate.is_finite() {
        return Err(PredictorError::InvalidHyperparameter(format!(
            "learning rate must be positive, got {learning_rate}"
        )));
    }
    let label_set = labels.distinct_sorted();
    if label_set.len() != 2 {
        return Err(PredictorError::NotBinary(label_set.len()));
    }
    let plan = EncodingPlan::from_training(training);
    if plan.columns.is_empty() {
        return Err(PredictorError::NoNumericRepresentation);
    }

    let x: Vec<Vec<f64>> = training.rows().map(|r| plan.encode(r)).collect();
    let y: Vec<f64> = labels
        .iter()
        .map(|l| if l == label_set[1] { 1.0 } else { 0.0 })
        .collect();

    let n = x.len() as f64;
    let p = plan.columns.len();
    let mut coefficients = vec![0.0; p];
    let mut bias = 0.0;
    for _ in 0..epochs {
        let mut grad_w = vec![0.0; p];
        let mut grad_b = 0.0;
        for (row, &target) in x.iter().zip(&y) {
            let z = bias
                + row
                    .iter()
                    .zip(&coefficients)
                    .map(|(xi, wi)| xi * wi)
                    .sum::<f64>();
            let err = sigmoid(z) - target;
            for (g, xi) in grad_w.iter_mut().zip(row) {
                *g += err * xi;
            }
            grad_b += err;
        }
        for (w, g) in coefficients.iter_mut().zip(&grad_w) {
            *w -= learning_rate * g / n;
        }
        bias -= learning_rate * grad_b / n;
    }

    Ok(LogisticPredictor {
        schema: training.schema().clone(),
        plan,
        labels: label_set,
        coefficients,
        bias,
    })
}

impl LogisticPredictor {
    /// P(positive class) for each input row.
    fn scores(&self, d: &Dataset) -> Result<Vec<f64>, PredictorError> {
        check_query_schema(&self.schema, d.schema())?;
        Ok(d.rows()
            .map(|r| {
                let x = self.plan.encode(r);
                let z = self.bias
                    + x.iter()
                        .zip(&self.coefficients)
                        .map(|(xi, wi)| xi * wi)
                        .sum::<f64>();
                sigmoid(z)
            })
            .collect())
    }
}

impl Predictor for LogisticPredictor {
    fn trained_labels(&self) -> &[String] {
        &self.labels
    }

    fn predict(&self, d: &Dataset) -> Result<LabelVector, PredictorError> {
        let labels = self
            .scores(d)?
            .into_iter()
            .map(|s| {
                // At exactly 0.5 both classes tie; the argmax convention
                // picks the earlier sorted label.
                if s > 0.5 {
                    self.labels[1].clone()
                } else {
                    self.labels[0].clone()
                }
            })
            .collect();
        LabelVector::new(labels).map_err(|e| PredictorError::EmptyInput(e.to_string()))
    }

    fn predict_proba(&self, d: &Dataset) -> Result<Option<ProbabilityMatrix>, PredictorError> {
        let rows = self
            .scores(d)?
            .into_iter()
            .map(|s| vec![1.0 - s, s])
            .collect();
        Ok(Some(ProbabilityMatrix::new(self.labels.clone(), rows)?))
    }
}

// ---------------------------------------------------------------------
// Precomputed predictions
// ---------------------------------------------------------------------

/// Stored predictions (and optional probabilities) for one fixed
/// dataset, identified by its content digest. Stands in for externally
/// trained models: querying any other dataset is an error.
#[derive(Debug, Clone)]
pub struct PrecomputedPredictor {
    dataset_digest: String,
    labels: Vec<String>,
    predictions: LabelVector,
    probabilities: Option<ProbabilityMatrix>,
}

impl PrecomputedPredictor {
    /// Binds `predictions` (and optional `probabilities`) to `d`. The
    /// prediction count must equal the row count; probabilities, when
    /// given, must cover every predicted label and argmax back to the
    /// stored predictions.
    pub fn new(
        d: &Dataset,
        predictions: LabelVector,
        probabilities: Option<ProbabilityMatrix>,
    ) -> Result<Self, PredictorError> {
        if predictions.len() != d.n_rows() {
            return Err(PredictorError::LabelMismatch {
                rows: d.n_rows(),
                labels: predictions.len(),
            });
        }
        let predicted = predictions.distinct_sorted();
        let labels = match &probabilities {
            Some(m) => {
                if m.n_rows() != d.n_rows() {
                    return Err(PredictorError::InvalidProbabilities(format!(
                        "{} probability rows for {} dataset rows",
                        m.n_rows(),
                        d.n_rows()
                    )));
                }
                for l in &predicted {
                    if m.column_of(l).is_none() {
                        return Err(PredictorError::InvalidProbabilities(format!(
                            "no probability column for predicted label `{l}`"
                        )));
                    }
                }
                let implied = m.argmax_labels();
                if implied != predictions {
                    return Err(PredictorError::InvalidProbabilities(
                        "probability argmax disagrees with predictions".to_string(),
                    ));
                }
                m.labels().to_vec()
            }
            None => predicted,
        };
        Ok(PrecomputedPredictor {
            dataset_digest: d.content_digest(),
            labels,
            predictions,
            probabilities,
        })
    }
}

impl Predictor for PrecomputedPredictor {
    fn trained_labels(&self) -> &[String] {
        &self.labels
    }

    fn predict(&self, d: &Dataset) -> Result<LabelVector, PredictorError> {
        if d.content_digest() != self.dataset_digest {
            return Err(PredictorError::WrongDataset(
                "content digest differs from the bound dataset".to_string(),
            ));
        }
        Ok(self.predictions.clone())
    }

    fn predict_proba(&self, d: &Dataset) -> Result<Option<ProbabilityMatrix>, PredictorError> {
        if d.content_digest() != self.dataset_digest {
            return Err(PredictorError::WrongDataset(
                "content digest differs from the bound dataset".to_string(),
            ));
        }
        Ok(self.probabilities.clone())
    }
}
