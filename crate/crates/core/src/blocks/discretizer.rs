//! Quartile discretizer: maps numeric values to bin indices bounded by
//! the column's quartile edges, leaving categorical values untouched.

use std::collections::BTreeMap;

use crate::dataset::{Dataset, FeatureKind, Value};

use super::BlockError;

/// Per-numeric-feature sorted bin edges, keyed by feature name. Edges
/// are strictly increasing; categorical features have no entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretizer {
    edges: BTreeMap<String, Vec<f64>>,
}

impl Discretizer {
    pub fn edges(&self, feature: &str) -> Option<&[f64]> {
        self.edges.get(feature).map(|e| e.as_slice())
    }

    pub fn features(&self) -> impl Iterator<Item = &str> {
        self.edges.keys().map(|s| s.as_str())
    }
}

/// Quantile of `sorted` (ascending) at probability `p`, by linear
/// interpolation at rank position `(n−1)·p`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!((0.0..=1.0).contains(&p));
    let position = (sorted.len() - 1) as f64 * p;
    let lo = position.floor() as usize;
    let hi = position.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = position - lo as f64;
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Fits quartile edges (Q1, Q2, Q3) for every numeric feature of `d`.
/// Duplicate edges are collapsed; a constant column gets zero edges
/// (one bin).
pub fn fit_quartile_discretizer(d: &Dataset) -> Result<Discretizer, BlockError> {
    if d.n_rows() < 2 {
        return Err(BlockError::EmptyInput(
            "discretizer needs at least 2 rows".to_string(),
        ));
    }
    let mut edges = BTreeMap::new();
    for (j, feature) in d.schema().features().iter().enumerate() {
        if feature.kind != FeatureKind::Numeric {
            continue;
        }
        let mut values = d.numeric_column(j).expect("numeric feature");
        values.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
        let feature_edges = if values[0] == values[values.len() - 1] {
            // Constant column: a single bin, no edges.
            Vec::new()
        } else {
            let mut qs: Vec<f64> = [0.25, 0.5, 0.75]
                .iter()
                .map(|&p| quantile(&values, p))
                .collect();
            qs.dedup();
            qs
        };
        edges.insert(feature.name.clone(), feature_edges);
    }
    Ok(Discretizer { edges })
}

/// Bin assignment for one row. Numeric values map to the index of the
/// first edge strictly greater than the value (values at or above the
/// last edge land in the final bin); categorical values pass through as
/// their own token.
pub fn discretize(disc: &Discretizer, d: &Dataset, row: usize) -> Result<Vec<String>, BlockError> {
    if row >= d.n_rows() {
        return Err(BlockError::SchemaMismatch(format!(
            "row index {row} out of range"
        )));
    }
    let mut bins = Vec::with_capacity(d.n_features());
    for (j, feature) in d.schema().features().iter().enumerate() {
        match &d.row(row)[j] {
            Value::Number(x) => {
                let edges = disc.edges(&feature.name).ok_or_else(|| {
                    BlockError::SchemaMismatch(format!(
                        "discretizer has no edges for numeric feature `{}`",
                        feature.name
                    ))
                })?;
                let bin = edges.iter().position(|e| x < e).unwrap_or(edges.len());
                bins.push(bin.to_string());
            }
            Value::Category(token) => bins.push(token.clone()),
        }
    }
    Ok(bins)
}
