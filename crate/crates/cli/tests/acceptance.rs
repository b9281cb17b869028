//! The toolkit's acceptance gate: twelve end-to-end checks covering the
//! explanation identities, the fairness arithmetic against brute-force
//! oracles, the stochastic analyses at fixed seeds, and the CLI
//! contract. Runs as a plain binary (no libtest harness) and prints one
//! PASS/FAIL line per criterion.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;

use tabaudit_core::accountability::{density_fit, robustness_flip_rate};
use tabaudit_core::blocks::{
    fit_quartile_discretizer, quantile, weighted_ridge_fit, LinearModel, SamplerConfig,
    DEFAULT_KERNEL_WIDTH,
};
use tabaudit_core::dataset::parse_csv;
use tabaudit_core::fairness::{
    disparate_impact, grouped_confusion, groupwise_disparity, rates, systemic_bias_pairs,
    DisparityMetric, PairState,
};
use tabaudit_core::predictors::{knn_fit, logistic_fit, majority_fit, PredictorError};
use tabaudit_core::transparency::{
    ice, partial_dependence, response_vector, surrogate_explain, GridConfig, SurrogateConfig,
};
use tabaudit_core::{Dataset, DetRng, LabelVector, Predictor, ProbabilityMatrix, Value};

fn main() {
    let criteria: Vec<(&str, fn())> = vec![
        ("ice_mean_equals_pd", ice_mean_equals_pd),
        ("pd_flat_for_ignored_feature", pd_flat_for_ignored_feature),
        (
            "surrogate_recovers_linear_black_box",
            surrogate_recovers_linear_black_box,
        ),
        ("fairness_matches_brute_force", fairness_matches_brute_force),
        ("four_fifths_rule_boundaries", four_fifths_rule_boundaries),
        ("systemic_pairs_match_scan", systemic_pairs_match_scan),
        ("density_flags_outlier", density_flags_outlier),
        ("robustness_flip_rates", robustness_flip_rates),
        ("weighted_ridge_properties", weighted_ridge_properties),
        ("byte_determinism", byte_determinism),
        ("quantile_edges", quantile_edges),
        (
            "cli_contract_and_csv_round_trip",
            cli_contract_and_csv_round_trip,
        ),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match catch_unwind(AssertUnwindSafe(check)) {
            Ok(()) => println!("criterion {:2} {name}: PASS", i + 1),
            Err(cause) => {
                failures += 1;
                println!("criterion {:2} {name}: FAIL", i + 1);
                let message = cause
                    .downcast_ref::<String>()
                    .map(String::as_str)
                    .or_else(|| cause.downcast_ref::<&str>().copied())
                    .unwrap_or("panicked without a message");
                println!("             -> {message}");
            }
        }
    }
    if failures > 0 {
        eprintln!("{failures} of 12 acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 12 acceptance criteria pass");
}

fn labels(tokens: &[&str]) -> LabelVector {
    LabelVector::new(tokens.iter().map(|s| s.to_string()).collect()).expect("valid labels")
}

// ---------------------------------------------------------------------
// Custom black boxes used by the explanation and robustness criteria.
// ---------------------------------------------------------------------

/// Thresholds on the first feature only; everything else is provably
/// ignored. Labels sorted: ["hi", "lo"], prediction "hi" above the
/// threshold.
struct FirstFeatureThreshold {
    threshold: f64,
    labels: Vec<String>,
}

impl FirstFeatureThreshold {
    fn new(threshold: f64) -> FirstFeatureThreshold {
        FirstFeatureThreshold {
            threshold,
            labels: vec!["hi".to_string(), "lo".to_string()],
        }
    }
}

impl Predictor for FirstFeatureThreshold {
    fn trained_labels(&self) -> &[String] {
        &self.labels
    }

    fn predict(&self, d: &Dataset) -> Result<LabelVector, PredictorError> {
        let out = d
            .rows()
            .map(|row| {
                let x0 = row[0].as_number().expect("numeric first feature");
                if x0 > self.threshold { "hi" } else { "lo" }.to_string()
            })
            .collect();
        Ok(LabelVector::new(out).expect("non-empty predictions"))
    }

    fn predict_proba(&self, _d: &Dataset) -> Result<Option<ProbabilityMatrix>, PredictorError> {
        Ok(None)
    }
}

/// P(pos) is linear in the first feature with slope 3 and completely
/// insensitive to the second: the recovery target for the surrogate.
struct LinearProba {
    labels: Vec<String>,
}

impl LinearProba {
    fn new() -> LinearProba {
        LinearProba {
            labels: vec!["neg".to_string(), "pos".to_string()],
        }
    }

    fn p_pos(row: &[Value]) -> f64 {
        let x0 = row[0].as_number().expect("numeric first feature");
        (0.5 + 3.0 * x0).clamp(0.0, 1.0)
    }
}

impl Predictor for LinearProba {
    fn trained_labels(&self) -> &[String] {
        &self.labels
    }

    fn predict(&self, d: &Dataset) -> Result<LabelVector, PredictorError> {
        let out = d
            .rows()
            .map(|row| {
                // Argmax with ties to the earlier sorted label.
                if Self::p_pos(row) > 0.5 { "pos" } else { "neg" }.to_string()
            })
            .collect();
        Ok(LabelVector::new(out).expect("non-empty predictions"))
    }

    fn predict_proba(&self, d: &Dataset) -> Result<Option<ProbabilityMatrix>, PredictorError> {
        let rows = d
            .rows()
            .map(|row| {
                let p = Self::p_pos(row);
                vec![1.0 - p, p]
            })
            .collect();
        Ok(Some(ProbabilityMatrix::new(self.labels.clone(), rows)?))
    }
}

// ---------------------------------------------------------------------
// 1. ICE–PD identity across predictors and datasets.
// ---------------------------------------------------------------------

/// Three small datasets with binary labels: all-numeric, mixed
/// numeric/categorical, and numeric with heavy duplication.
fn explanation_fixtures() -> Vec<(Dataset, LabelVector)> {
    let mut rng = DetRng::new(2024);
    let mut numeric = String::from("x0,x1\n");
    let mut numeric_labels = Vec::new();
    for _ in 0..24 {
        let a = (rng.next_f64() * 10.0 * 2.0).round() / 2.0;
        let b = (rng.next_f64() * 4.0 * 2.0).round() / 2.0;
        numeric.push_str(&format!("{a},{b}\n"));
        numeric_labels.push(if a + b > 7.0 { "yes" } else { "no" }.to_string());
    }

    let mut mixed = String::from("age,colour\n");
    let mut mixed_labels = Vec::new();
    for i in 0..18 {
        let age = 20 + (i * 3) % 40;
        let colour = ["red", "green", "blue"][i % 3];
        mixed.push_str(&format!("{age},{colour}\n"));
        mixed_labels.push(
            if age > 35 || colour == "blue" {
                "yes"
            } else {
                "no"
            }
            .to_string(),
        );
    }

    let mut dupes = String::from("v,w\n");
    let mut dupe_labels = Vec::new();
    for i in 0..20 {
        let v = [1, 1, 2, 5][i % 4];
        let w = i % 2;
        dupes.push_str(&format!("{v},{w}\n"));
        dupe_labels.push(if v > 1 { "yes" } else { "no" }.to_string());
    }

    vec![
        (
            parse_csv(&numeric, None).unwrap(),
            LabelVector::new(numeric_labels).unwrap(),
        ),
        (
            parse_csv(&mixed, None).unwrap(),
            LabelVector::new(mixed_labels).unwrap(),
        ),
        (
            parse_csv(&dupes, None).unwrap(),
            LabelVector::new(dupe_labels).unwrap(),
        ),
    ]
}

fn ice_mean_equals_pd() {
    let grid_cfg = GridConfig { resolution: 6 };
    for (d, y) in explanation_fixtures() {
        let models: Vec<Box<dyn Predictor>> = vec![
            Box::new(majority_fit(&d, &y).expect("majority")),
            Box::new(knn_fit(&d, &y, 3).expect("knn")),
            Box::new(logistic_fit(&d, &y, 60, 0.1).expect("logistic")),
        ];
        let feature_names: Vec<String> = d.schema().names().map(str::to_string).collect();
        for model in &models {
            for feature in &feature_names {
                let ice_result = ice(model.as_ref(), &d, feature, &grid_cfg, "yes").expect("ice");
                let pd =
                    partial_dependence(model.as_ref(), &d, feature, &grid_cfg, "yes").expect("pd");
                assert_eq!(ice_result.grid, pd.grid);

                // Column means recomputed here, independent of the
                // library's aggregation.
                let n = ice_result.curves.len() as f64;
                for (j, &pd_value) in pd.curve.iter().enumerate() {
                    let mean: f64 = ice_result.curves.iter().map(|curve| curve[j]).sum::<f64>() / n;
                    assert!(
                        (mean - pd_value).abs() <= 1e-12,
                        "feature {feature}, grid point {j}: mean(ICE) {mean} vs PD {pd_value}"
                    );
                }

                // And each ICE cell re-derived from scratch: substitute
                // the grid point into the row and re-query the model.
                let col = d.schema().index_of(feature).unwrap();
                for (i, curve) in ice_result.curves.iter().enumerate() {
                    for (j, point) in ice_result.grid.points.iter().enumerate() {
                        let mut row = d.row(i).to_vec();
                        row[col] = point.clone();
                        let single =
                            Dataset::new(d.schema().clone(), vec![row]).expect("single row");
                        let response =
                            response_vector(model.as_ref(), &single, "yes").expect("response")[0];
                        assert!(
                            (response - curve[j]).abs() <= 1e-12,
                            "row {i}, grid point {j}: substituted response {response} vs ICE {}",
                            curve[j]
                        );
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------
// 2. PD flatness for a provably ignored feature.
// ---------------------------------------------------------------------

fn pd_flat_for_ignored_feature() {
    let mut csv = String::from("x0,x1\n");
    for i in 0..12 {
        csv.push_str(&format!("{},{}\n", i, (i * 7) % 5));
    }
    let d = parse_csv(&csv, None).unwrap();
    let cfg = GridConfig { resolution: 8 };

    // The threshold model reads x0 only, so sweeping x1 changes nothing.
    let model = FirstFeatureThreshold::new(5.0);
    let pd = partial_dependence(&model, &d, "x1", &cfg, "hi").expect("pd");
    let min = pd.curve.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = pd.curve.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(
        max - min,
        0.0,
        "curve should be exactly flat: {:?}",
        pd.curve
    );

    // The majority model ignores every feature.
    let y = labels(&["a", "a", "b", "a", "a", "b", "a", "a", "b", "a", "a", "b"]);
    let majority = majority_fit(&d, &y).expect("majority");
    for feature in ["x0", "x1"] {
        let pd = partial_dependence(&majority, &d, feature, &cfg, "a").expect("pd");
        let min = pd.curve.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = pd.curve.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(max - min, 0.0);
    }
}

// ---------------------------------------------------------------------
// 3. Surrogate recovery of a linear black box.
// ---------------------------------------------------------------------

fn surrogate_recovers_linear_black_box() {
    // Reference data in a narrow band so the black box stays in its
    // linear regime for almost every perturbed sample.
    let mut rng = DetRng::new(5);
    let mut csv = String::from("x1,x2\n");
    for _ in 0..60 {
        let a = rng.next_f64() * 0.2 - 0.1;
        let b = rng.next_f64() * 0.2 - 0.1;
        csv.push_str(&format!("{a},{b}\n"));
    }
    let d = parse_csv(&csv, None).unwrap();
    let model = LinearProba::new();
    let anchor = vec![Value::Number(0.0), Value::Number(0.0)];
    let cfg = SurrogateConfig {
        sampler: SamplerConfig::new(5000, 42),
        kernel_width: DEFAULT_KERNEL_WIDTH,
        ridge_lambda: 1.0,
    };
    let exp = surrogate_explain(&model, &anchor, &d, &cfg, "pos").expect("surrogate");

    assert_eq!(exp.feature_names, vec!["x1", "x2"]);
    let w1 = exp.weights[0];
    let w2 = exp.weights[1];
    assert!(w1 > 0.0, "slope sign should match the black box, got {w1}");
    assert!(
        w1.abs() > 5.0 * w2.abs(),
        "influential feature should dominate: w1 {w1}, w2 {w2}"
    );
    let fidelity = exp.fidelity.expect("non-constant responses");
    assert!(fidelity >= 0.9, "fidelity {fidelity} below 0.9");
}

// ---------------------------------------------------------------------
// 4. Fairness arithmetic against a brute-force oracle.
// ---------------------------------------------------------------------

struct OracleCounts {
    tp: usize,
    fp: usize,
    tn: usize,
    fn_: usize,
}

impl OracleCounts {
    fn rate(num: usize, den: usize) -> Option<f64> {
        (den > 0).then(|| num as f64 / den as f64)
    }

    fn metric(&self, metric: DisparityMetric) -> Option<f64> {
        let n = self.tp + self.fp + self.tn + self.fn_;
        match metric {
            DisparityMetric::Tpr => Self::rate(self.tp, self.tp + self.fn_),
            DisparityMetric::Fpr => Self::rate(self.fp, self.fp + self.tn),
            DisparityMetric::Ppv => Self::rate(self.tp, self.tp + self.fp),
            DisparityMetric::Accuracy => Self::rate(self.tp + self.tn, n),
            DisparityMetric::PositiveRate => Self::rate(self.tp + self.fp, n),
        }
    }
}

const ALL_METRICS: [DisparityMetric; 5] = [
    DisparityMetric::Tpr,
    DisparityMetric::Fpr,
    DisparityMetric::PositiveRate,
    DisparityMetric::Ppv,
    DisparityMetric::Accuracy,
];

/// A random instance: a one-column protected dataset plus random truth
/// and prediction vectors. Rows 0..n_groups pin every group to at least
/// one row.
fn random_fairness_instance(trial: u64) -> (Dataset, LabelVector, LabelVector) {
    let mut rng = DetRng::substream(909, trial);
    let n = 4 + rng.next_index(37); // 4..=40
    let n_groups = 2 + rng.next_index(2); // 2 or 3
    let mut csv = String::from("x,grp\n");
    let mut y_true = Vec::new();
    let mut y_pred = Vec::new();
    for i in 0..n {
        let g = if i < n_groups {
            i
        } else {
            rng.next_index(n_groups)
        };
        csv.push_str(&format!("{},g{g}\n", rng.next_index(5)));
        y_true.push(if rng.next_f64() < 0.5 { "+" } else { "-" }.to_string());
        y_pred.push(if rng.next_f64() < 0.5 { "+" } else { "-" }.to_string());
    }
    (
        parse_csv(&csv, None).unwrap(),
        LabelVector::new(y_true).unwrap(),
        LabelVector::new(y_pred).unwrap(),
    )
}

fn fairness_matches_brute_force() {
    const TOLERANCE: f64 = 0.1;
    for trial in 0..20 {
        let (d, y_true, y_pred) = random_fairness_instance(trial);
        let grp_col = d.schema().index_of("grp").unwrap();

        // Oracle: raw loops over rows, counting per group.
        let mut oracle: BTreeMap<String, OracleCounts> = BTreeMap::new();
        let mut group_positives: BTreeMap<String, (u128, u128)> = BTreeMap::new();
        for (i, row) in d.rows().enumerate() {
            let g = row[grp_col].as_category().unwrap().to_string();
            let c = oracle.entry(g.clone()).or_insert(OracleCounts {
                tp: 0,
                fp: 0,
                tn: 0,
                fn_: 0,
            });
            match (y_true.get(i) == "+", y_pred.get(i) == "+") {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fn_ += 1,
            }
            let e = group_positives.entry(g).or_insert((0, 0));
            if y_pred.get(i) == "+" {
                e.0 += 1;
            }
            e.1 += 1;
        }

        // Confusion cells: exact integer equality.
        let gc = grouped_confusion(&d, "grp", &y_true, &y_pred, "+").expect("confusion");
        assert_eq!(gc.per_group.len(), oracle.len());
        for (g, counts) in &oracle {
            let cm = &gc.per_group[g];
            assert_eq!(
                (
                    cm.true_positives,
                    cm.false_positives,
                    cm.true_negatives,
                    cm.false_negatives
                ),
                (counts.tp, counts.fp, counts.tn, counts.fn_),
                "trial {trial}, group {g}"
            );
            // All five rates within 1e-12, agreeing on definedness.
            let rs = rates(cm);
            for metric in ALL_METRICS {
                let lib = match metric {
                    DisparityMetric::Tpr => rs.tpr,
                    DisparityMetric::Fpr => rs.fpr,
                    DisparityMetric::Ppv => rs.ppv,
                    DisparityMetric::Accuracy => rs.accuracy,
                    DisparityMetric::PositiveRate => rs.positive_rate,
                }
                .value();
                let want = counts.metric(metric);
                match (lib, want) {
                    (None, None) => {}
                    (Some(a), Some(b)) => assert!(
                        (a - b).abs() <= 1e-12,
                        "trial {trial}, group {g}, {}: {a} vs {b}",
                        metric.name()
                    ),
                    other => panic!(
                        "trial {trial}, group {g}, {}: definedness mismatch {other:?}",
                        metric.name()
                    ),
                }
            }
        }

        // Violation grids for every metric.
        for metric in ALL_METRICS {
            let report = groupwise_disparity(&d, "grp", &y_true, &y_pred, metric, "+", TOLERANCE)
                .expect("disparity");
            let names: Vec<&String> = oracle.keys().collect();
            for (ai, a) in names.iter().enumerate() {
                for b in names.iter().skip(ai + 1) {
                    let want = match (oracle[*a].metric(metric), oracle[*b].metric(metric)) {
                        (Some(x), Some(y)) => {
                            if (x - y).abs() > TOLERANCE {
                                PairState::Violation
                            } else {
                                PairState::Fair
                            }
                        }
                        _ => PairState::Indeterminate,
                    };
                    assert_eq!(
                        report.state(a, b),
                        Some(want),
                        "trial {trial}, {} pair ({a}, {b})",
                        metric.name()
                    );
                }
            }
        }

        // Disparate impact: ratio as exact integer fraction products.
        let di = disparate_impact(&d, "grp", &y_pred, "+").expect("di");
        let fractions: Vec<(u128, u128)> = group_positives.values().cloned().collect();
        let mut min = 0;
        let mut max = 0;
        for i in 1..fractions.len() {
            if fractions[i].0 * fractions[min].1 < fractions[min].0 * fractions[i].1 {
                min = i;
            }
            if fractions[i].0 * fractions[max].1 > fractions[max].0 * fractions[i].1 {
                max = i;
            }
        }
        let (want_ratio, want_pass) = if fractions[max].0 == 0 {
            (1.0, true)
        } else {
            let num = fractions[min].0 * fractions[max].1;
            let den = fractions[max].0 * fractions[min].1;
            (num as f64 / den as f64, 5 * num >= 4 * den)
        };
        assert!(
            (di.ratio - want_ratio).abs() <= 1e-12,
            "trial {trial}: ratio {} vs oracle {want_ratio}",
            di.ratio
        );
        assert_eq!(di.pass, want_pass, "trial {trial}");
    }
}

// ---------------------------------------------------------------------
// 5. Four-fifths rule: a clear failure and an exact boundary pass.
// ---------------------------------------------------------------------

fn four_fifths_rule_boundaries() {
    // Group a: 2 of 4 predicted positive (0.5); group b: 1 of 4 (0.25).
    let d = parse_csv("grp\na\na\na\na\nb\nb\nb\nb\n", None).unwrap();
    let y_pred = labels(&["+", "+", "-", "-", "+", "-", "-", "-"]);
    let di = disparate_impact(&d, "grp", &y_pred, "+").expect("di");
    assert!((di.ratio - 0.5).abs() <= 1e-12, "ratio {}", di.ratio);
    assert!(!di.pass);
    assert_eq!((di.min_group.as_str(), di.max_group.as_str()), ("b", "a"));

    // Boundary: rates 0.4 (2/5) and 0.32 (8/25) give exactly 4/5, which
    // must pass even though neither rate is representable in binary.
    let mut csv = String::from("grp\n");
    let mut pred = Vec::new();
    for i in 0..5 {
        csv.push_str("a\n");
        pred.push(if i < 2 { "+" } else { "-" });
    }
    for i in 0..25 {
        csv.push_str("b\n");
        pred.push(if i < 8 { "+" } else { "-" });
    }
    let d = parse_csv(&csv, None).unwrap();
    let y_pred = labels(&pred);
    let di = disparate_impact(&d, "grp", &y_pred, "+").expect("di");
    assert!((di.ratio - 0.8).abs() <= 1e-12, "ratio {}", di.ratio);
    assert!(di.pass, "exact four-fifths boundary must pass");
    assert_eq!((di.min_group.as_str(), di.max_group.as_str()), ("b", "a"));
}

// ---------------------------------------------------------------------
// 6. Systemic pairs: injected cases plus a bucket-scan oracle.
// ---------------------------------------------------------------------

/// Independent implementation: bucket rows by their non-protected
/// signature, then compare within buckets only.
fn bucket_scan_oracle(d: &Dataset, protected: &str, y: &LabelVector) -> Vec<(usize, usize)> {
    let p = d.schema().index_of(protected).unwrap();
    let mut buckets: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, row) in d.rows().enumerate() {
        let sig: Vec<String> = row
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != p)
            .map(|(_, v)| v.render())
            .collect();
        buckets.entry(sig.join("\u{1f}")).or_default().push(i);
    }
    let mut pairs = Vec::new();
    for rows in buckets.values() {
        for (a, &i) in rows.iter().enumerate() {
            for &j in rows.iter().skip(a + 1) {
                if d.row(i)[p] != d.row(j)[p] && y.get(i) != y.get(j) {
                    pairs.push((i, j));
                }
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

fn systemic_pairs_match_scan() {
    // Injected: rows 0/1 and 0/6 are the same case decided differently;
    // 2/3 share the label and 4/5 share the protected token.
    let d = parse_csv("x,grp\n1,a\n1,b\n2,a\n2,b\n3,a\n3,a\n1,c\n", None).unwrap();
    let y = labels(&["+", "-", "+", "+", "+", "-", "-"]);
    let found = systemic_bias_pairs(&d, "grp", &y).expect("pairs");
    assert_eq!(found, vec![(0, 1), (0, 6)]);

    // Random instances against the bucket oracle.
    for trial in 0..20 {
        let mut rng = DetRng::substream(7878, trial);
        let n = 4 + rng.next_index(37);
        let mut csv = String::from("x,grp\n");
        let mut y = Vec::new();
        for _ in 0..n {
            // Tiny value pools force plenty of signature collisions.
            csv.push_str(&format!(
                "{},g{}\n",
                rng.next_index(2) + 1,
                rng.next_index(3)
            ));
            y.push(if rng.next_f64() < 0.5 { "+" } else { "-" }.to_string());
        }
        let d = parse_csv(&csv, None).unwrap();
        let y = LabelVector::new(y).unwrap();
        let found = systemic_bias_pairs(&d, "grp", &y).expect("pairs");
        assert_eq!(found, bucket_scan_oracle(&d, "grp", &y), "trial {trial}");
    }
}

// ---------------------------------------------------------------------
// 7. Density: outliers score highest, duplicates score zero.
// ---------------------------------------------------------------------

fn density_flags_outlier() {
    let mut rng = DetRng::new(31);
    let mut csv = String::from("x,y\n");
    for _ in 0..20 {
        let jx = rng.next_f64() * 0.2 - 0.1;
        let jy = rng.next_f64() * 0.2 - 0.1;
        csv.push_str(&format!("{jx},{jy}\n"));
    }
    csv.push_str("100,100\n");
    let d = parse_csv(&csv, None).unwrap();
    let scorer = density_fit(&d, 3).expect("fit");
    let scores: Vec<f64> = (0..d.n_rows())
        .map(|i| scorer.score(d.row(i)).expect("score"))
        .collect();
    assert!(scores.iter().all(|s| (0.0..=1.0).contains(s)), "{scores:?}");
    let outlier = scores[20];
    for (i, &s) in scores.iter().enumerate().take(20) {
        assert!(outlier > s, "outlier {outlier} not above row {i} ({s})");
    }

    // A value repeated more than k times has k neighbours at distance
    // zero, hence score exactly 0.
    let dupes = parse_csv("x,y\n5,5\n5,5\n5,5\n5,5\n1,2\n9,3\n4,7\n", None).unwrap();
    let scorer = density_fit(&dupes, 2).expect("fit");
    for i in 0..4 {
        assert_eq!(scorer.score(dupes.row(i)).expect("score"), 0.0, "row {i}");
    }
}

// ---------------------------------------------------------------------
// 8. Robustness flip rates: exact zero and the symmetric boundary.
// ---------------------------------------------------------------------

fn robustness_flip_rates() {
    let mut csv = String::from("x\n");
    for i in -10..=10 {
        csv.push_str(&format!("{}\n", i as f64 / 2.0));
    }
    let d = parse_csv(&csv, None).unwrap();

    // A constant model cannot flip.
    let y = labels(&["s"; 21]);
    let constant = majority_fit(&d, &y).expect("majority");
    let result = robustness_flip_rate(
        &constant,
        &[Value::Number(0.25)],
        &d,
        &SamplerConfig::new(500, 9),
    )
    .expect("robustness");
    assert_eq!(result.flip_rate, 0.0);

    // At the decision boundary of a threshold model, symmetric gaussian
    // noise flips the prediction about half the time.
    let threshold = FirstFeatureThreshold::new(0.0);
    let result = robustness_flip_rate(
        &threshold,
        &[Value::Number(0.0)],
        &d,
        &SamplerConfig::new(2000, 7),
    )
    .expect("robustness");
    assert_eq!(result.n_samples, 2000);
    assert!(
        (result.flip_rate - 0.5).abs() <= 0.05,
        "flip rate {} not within 0.05 of 0.5",
        result.flip_rate
    );
}

// ---------------------------------------------------------------------
// 9. Weighted ridge: recovery, replication equivalence, minimality.
// ---------------------------------------------------------------------

fn ridge_loss(x: &[Vec<f64>], y: &[f64], w: &[f64], model: &LinearModel) -> f64 {
    let data: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((row, &yi), &wi)| {
            let r = yi - model.predict_row(row);
            wi * r * r
        })
        .sum();
    let penalty: f64 = model.weights.iter().map(|b| b * b).sum::<f64>() * model.ridge_lambda;
    data + penalty
}

fn weighted_ridge_properties() {
    // Exact fit: λ = 0 on y = 2x + 1 recovers the line.
    let x: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
    let y: Vec<f64> = x.iter().map(|r| 2.0 * r[0] + 1.0).collect();
    let model = weighted_ridge_fit(&x, &y, &[1.0; 4], 0.0).expect("fit");
    assert!(
        (model.weights[0] - 2.0).abs() <= 1e-9,
        "slope {}",
        model.weights[0]
    );
    assert!(
        (model.intercept - 1.0).abs() <= 1e-9,
        "intercept {}",
        model.intercept
    );

    // Integer weights behave exactly like replicated rows.
    let xw = vec![vec![1.0, 0.5], vec![2.0, -1.0], vec![3.0, 2.0]];
    let yw = vec![2.0, 3.0, 10.0];
    let weighted = weighted_ridge_fit(&xw, &yw, &[1.0, 2.0, 3.0], 1.0).expect("fit");
    let mut xr = Vec::new();
    let mut yr = Vec::new();
    for (i, row) in xw.iter().enumerate() {
        for _ in 0..=i {
            xr.push(row.clone());
            yr.push(yw[i]);
        }
    }
    let replicated = weighted_ridge_fit(&xr, &yr, &[1.0; 6], 1.0).expect("fit");
    for (a, b) in weighted.weights.iter().zip(&replicated.weights) {
        assert!((a - b).abs() <= 1e-9, "weights {a} vs {b}");
    }
    assert!((weighted.intercept - replicated.intercept).abs() <= 1e-9);

    // The fitted coefficients sit at a local minimum of the penalized
    // loss: nudging any one of them raises it.
    let x = vec![
        vec![1.0, 2.0],
        vec![2.0, 1.0],
        vec![3.0, 3.0],
        vec![4.0, 0.0],
        vec![0.0, 4.0],
    ];
    let y = vec![1.5, 2.0, 4.5, 3.0, 5.5];
    let w = vec![1.0, 0.5, 2.0, 1.5, 1.0];
    let fitted = weighted_ridge_fit(&x, &y, &w, 1.0).expect("fit");
    let base = ridge_loss(&x, &y, &w, &fitted);
    for coeff in 0..=fitted.weights.len() {
        for delta in [-1e-3, 1e-3] {
            let mut nudged = fitted.clone();
            if coeff < fitted.weights.len() {
                nudged.weights[coeff] += delta;
            } else {
                nudged.intercept += delta;
            }
            let perturbed = ridge_loss(&x, &y, &w, &nudged);
            assert!(
                perturbed > base,
                "coefficient {coeff} {delta:+}: loss {perturbed} did not rise above {base}"
            );
        }
    }
}

// ---------------------------------------------------------------------
// 10. Byte determinism of reports and explanations.
// ---------------------------------------------------------------------

/// Writes a small audit fixture and returns (config path, temp dir).
fn cli_fixture() -> (std::path::PathBuf, tempfile::TempDir) {
    let dir = tempfile::TempDir::new().expect("tempdir");
    let data = dir.path().join("data.csv");
    fs::write(
        &data,
        "age,income,sex,outcome\n\
         25,1200,f,bad\n32,3400,m,good\n41,5200,m,good\n29,2100,f,bad\n\
         38,4100,f,good\n45,6000,m,good\n23,1500,f,bad\n36,3900,m,good\n",
    )
    .expect("write data");
    let config = dir.path().join("audit.toml");
    fs::write(
        &config,
        format!(
            r#"seed = 42
data = {:?}
labels = "outcome"
positive = "good"
protected = "sex"

[model]
kind = "knn"
k = 3

[fairness]
tolerance = 0.1
metrics = ["positive_rate", "tpr"]
disparate_impact = true

[accountability.density]
k = 2

[accountability.robustness]
anchors = [0, 3]
n_samples = 200

[transparency]
grid_resolution = 5
pd = ["age"]

[transparency.surrogate]
anchors = [1]
n_samples = 300
"#,
            data.to_str().unwrap()
        ),
    )
    .expect("write config");
    (config, dir)
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_tabaudit"))
        .args(args)
        .output()
        .expect("spawn tabaudit")
}

fn byte_determinism() {
    // Two full CLI report runs produce identical bytes.
    let (config, _dir) = cli_fixture();
    let first = run_cli(&["report", "--config", config.to_str().unwrap()]);
    let second = run_cli(&["report", "--config", config.to_str().unwrap()]);
    assert_eq!(
        first.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    assert_eq!(first.stdout, second.stdout);
    assert!(!first.stdout.is_empty());

    // Two surrogate fits with the same seed agree on every field.
    let mut rng = DetRng::new(77);
    let mut csv = String::from("a,b\n");
    for _ in 0..30 {
        csv.push_str(&format!("{},{}\n", rng.next_f64(), rng.next_f64()));
    }
    let d = parse_csv(&csv, None).unwrap();
    let model = LinearProba::new();
    let anchor = vec![Value::Number(0.5), Value::Number(0.5)];
    let cfg = SurrogateConfig {
        sampler: SamplerConfig::new(400, 11),
        kernel_width: DEFAULT_KERNEL_WIDTH,
        ridge_lambda: 1.0,
    };
    let a = surrogate_explain(&model, &anchor, &d, &cfg, "pos").expect("surrogate");
    let b = surrogate_explain(&model, &anchor, &d, &cfg, "pos").expect("surrogate");
    assert_eq!(a, b);
}

// ---------------------------------------------------------------------
// 11. Quantile interpolation on 1..8.
// ---------------------------------------------------------------------

fn quantile_edges() {
    let values: Vec<f64> = (1..=8).map(|i| i as f64).collect();
    assert_eq!(quantile(&values, 0.25), 2.75);
    assert_eq!(quantile(&values, 0.5), 4.5);
    assert_eq!(quantile(&values, 0.75), 6.25);

    // The quartile discretizer publishes exactly those edges.
    let csv = format!(
        "v\n{}",
        (1..=8).map(|i| format!("{i}\n")).collect::<String>()
    );
    let d = parse_csv(&csv, None).unwrap();
    let disc = fit_quartile_discretizer(&d).expect("discretizer");
    assert_eq!(
        disc.edges("v").expect("numeric feature"),
        &[2.75, 4.5, 6.25]
    );
}

// ---------------------------------------------------------------------
// 12. CLI exit codes and CSV round-trip identity.
// ---------------------------------------------------------------------

fn cli_contract_and_csv_round_trip() {
    let (config, dir) = cli_fixture();
    let config = config.to_str().unwrap();

    // 0: a successful report (violations present, but no --fail flag).
    assert_eq!(
        run_cli(&["report", "--config", config]).status.code(),
        Some(0)
    );
    // 2: usage/config errors.
    assert_eq!(run_cli(&["report"]).status.code(), Some(2));
    assert_eq!(run_cli(&["--not-a-flag"]).status.code(), Some(2));
    // 3: data errors.
    let missing = dir.path().join("missing.csv");
    assert_eq!(
        run_cli(&[
            "report",
            "--config",
            config,
            "--data",
            missing.to_str().unwrap()
        ])
        .status
        .code(),
        Some(3)
    );
    // 4: violations under --fail-on-violation.
    assert_eq!(
        run_cli(&["report", "--config", config, "--fail-on-violation"])
            .status
            .code(),
        Some(4)
    );

    // 1000-row mixed-type file serializes back to the identical bytes.
    let mut rng = DetRng::new(1000);
    let mut csv = String::from("amount,count,kind\n");
    for _ in 0..1000 {
        let amount = (rng.next_f64() * 200.0 * 4.0).round() / 4.0;
        let count = rng.next_index(50);
        let kind = format!("c{}", rng.next_index(5));
        csv.push_str(&format!("{amount},{count},{kind}\n"));
    }
    let d = parse_csv(&csv, None).unwrap();
    assert_eq!(d.n_rows(), 1000);
    assert_eq!(d.to_csv(), csv, "round trip changed the bytes");
    // And the reparse sees the identical table.
    let d2 = parse_csv(&d.to_csv(), None).unwrap();
    assert_eq!(d.content_digest(), d2.content_digest());
}
