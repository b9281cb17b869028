//! Mixed numeric/categorical distance on [0,1], the metric behind
//! nearest-neighbour search, density scoring and kernel weighting.

use std::collections::BTreeMap;

use crate::dataset::{Dataset, FeatureKind, Value};

use super::BlockError;

/// Per-numeric-feature (min, max) taken from a reference dataset, used to
/// normalize numeric differences.
pub fn numeric_ranges(d: &Dataset) -> BTreeMap<String, (f64, f64)> {
    let mut ranges = BTreeMap::new();
    for (j, feature) in d.schema().features().iter().enumerate() {
        if feature.kind != FeatureKind::Numeric {
            continue;
        }
        let column = d.numeric_column(j).expect("numeric feature");
        let min = column.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = column.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        ranges.insert(feature.name.clone(), (min, max));
    }
    ranges
}

/// Mean over features of per-feature distances: numeric → |aⱼ−bⱼ|
/// normalized by the reference range and clipped to [0,1] (an empty range
/// contributes 0); categorical → 0 if equal, else 1. The result is
/// symmetric and lies in [0,1].
pub fn mixed_distance(
    d: &Dataset,
    a: &[Value],
    b: &[Value],
    ranges: &BTreeMap<String, (f64, f64)>,
) -> Result<f64, BlockError> {
    let schema = d.schema();
    if a.len() != schema.len() || b.len() != schema.len() {
        return Err(BlockError::SchemaMismatch(format!(
            "instances have {} and {} cells, schema has {} features",
            a.len(),
            b.len(),
            schema.len()
        )));
    }
    let mut total = 0.0;
    for (j, feature) in schema.features().iter().enumerate() {
        let per_feature = match (&a[j], &b[j]) {
            (Value::Number(x), Value::Number(y)) => {
                let (min, max) = ranges.get(&feature.name).copied().ok_or_else(|| {
                    BlockError::SchemaMismatch(format!(
                        "no range for numeric feature `{}`",
                        feature.name
                    ))
                })?;
                let span = max - min;
                if span == 0.0 {
                    0.0
                } else {
                    ((x - y).abs() / span).min(1.0)
                }
            }
            (Value::Category(s), Value::Category(t)) => {
                if s == t {
                    0.0
                } else {
                    1.0
                }
            }
            _ => {
                return Err(BlockError::SchemaMismatch(format!(
                    "instances disagree on the kind of feature `{}`",
                    feature.name
                )))
            }
        };
        total += per_feature;
    }
    Ok(total / schema.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::parse_csv;

    #[test]
    fn identical_instances_have_zero_distance() {
        let d = parse_csv("x,g\n1,a\n9,b", None).unwrap();
        let ranges = numeric_ranges(&d);
        let a = d.row(0);
        assert_eq!(mixed_distance(&d, a, a, &ranges).unwrap(), 0.0);
    }

    #[test]
    fn normalized_extremes_reach_one() {
        let d = parse_csv("x\n0\n10", None).unwrap();
        let ranges = numeric_ranges(&d);
        let dist = mixed_distance(&d, d.row(0), d.row(1), &ranges).unwrap();
        assert_eq!(dist, 1.0);
    }

    #[test]
    fn mixed_pair_hand_arithmetic() {
        // Numeric |1−3|/4 = 0.5, categorical equal → 0; mean = 0.25.
        let d = parse_csv("x,g\n0,a\n1,a\n3,a\n4,a", None).unwrap();
        let ranges = numeric_ranges(&d);
        let dist = mixed_distance(&d, d.row(1), d.row(2), &ranges).unwrap();
        assert_eq!(dist, 0.25);
    }

    #[test]
    fn constant_feature_contributes_nothing() {
        let d = parse_csv("x,y\n5,0\n5,10", None).unwrap();
        let ranges = numeric_ranges(&d);
        let dist = mixed_distance(&d, d.row(0), d.row(1), &ranges).unwrap();
        assert_eq!(dist, 0.5);
    }

    #[test]
    fn out_of_range_values_clip() {
        let d = parse_csv("x\n0\n10", None).unwrap();
        let ranges = numeric_ranges(&d);
        let far = vec![Value::Number(1000.0)];
        let near = vec![Value::Number(0.0)];
        assert_eq!(mixed_distance(&d, &near, &far, &ranges).unwrap(), 1.0);
    }

    #[test]
    fn symmetry_and_bounds() {
        let d = parse_csv("x,g\n0,a\n2,b\n7,c\n10,a", None).unwrap();
        let ranges = numeric_ranges(&d);
        for i in 0..d.n_rows() {
            for k in 0..d.n_rows() {
                let ab = mixed_distance(&d, d.row(i), d.row(k), &ranges).unwrap();
                let ba = mixed_distance(&d, d.row(k), d.row(i), &ranges).unwrap();
                assert_eq!(ab, ba);
                assert!((0.0..=1.0).contains(&ab));
            }
        }
    }

    #[test]
    fn wrong_arity_rejected() {
        let d = parse_csv("x,g\n1,a\n2,b", None).unwrap();
        let ranges = numeric_ranges(&d);
        let short = vec![Value::Number(1.0)];
        assert!(matches!(
            mixed_distance(&d, &short, d.row(0), &ranges),
            Err(BlockError::SchemaMismatch(_))
        ));
    }
}
