//! One-hot encoding of mixed datasets into a dense numeric matrix.

use std::collections::BTreeSet;

use crate::dataset::{Dataset, FeatureKind, Value};

/// Dense row-major numeric design matrix with per-column labels.
/// Numeric features keep their name; each categorical feature expands to
/// indicator columns labelled `<feature>=<token>` in sorted token order.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    pub labels: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl EncodedMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.labels.len()
    }
}

/// Encodes a dataset as a numeric matrix. Token order within each
/// categorical block is sorted, so the encoding depends only on the data,
/// not on row order.
pub fn one_hot_encode(d: &Dataset) -> EncodedMatrix {
    // Column plan: numeric features map to a single column, categorical
    // features to one indicator column per distinct token.
    enum Plan {
        Numeric(usize),
        Indicators(usize, Vec<String>),
    }
    let mut plan = Vec::new();
    let mut labels = Vec::new();
    for (j, feature) in d.schema().features().iter().enumerate() {
        match feature.kind {
            FeatureKind::Numeric => {
                labels.push(feature.name.clone());
                plan.push(Plan::Numeric(j));
            }
            FeatureKind::Categorical => {
                let tokens: BTreeSet<String> = d
                    .column(j)
                    .map(|v| v.as_category().expect("kind checked").to_string())
                    .collect();
                let tokens: Vec<String> = tokens.into_iter().collect();
                for t in &tokens {
                    labels.push(format!("{}={}", feature.name, t));
                }
                plan.push(Plan::Indicators(j, tokens));
            }
        }
    }
    let rows = d
        .rows()
        .map(|row| {
            let mut out = Vec::with_capacity(labels.len());
            for p in &plan {
                match p {
                    Plan::Numeric(j) => match &row[*j] {
                        Value::Number(x) => out.push(*x),
                        Value::Category(_) => unreachable!("kind checked at construction"),
                    },
                    Plan::Indicators(j, tokens) => {
                        let token = row[*j].as_category().expect("kind checked");
                        for t in tokens {
                            out.push(if t == token { 1.0 } else { 0.0 });
                        }
                    }
                }
            }
            out
        })
        .collect();
    EncodedMatrix { labels, rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::parse_csv;

    #[test]
    fn indicator_columns_in_sorted_order() {
        let d = parse_csv("g\nb\na\nb", None).unwrap();
        let m = one_hot_encode(&d);
        assert_eq!(m.labels, vec!["g=a", "g=b"]);
        assert_eq!(m.rows[0], vec![0.0, 1.0]);
        assert_eq!(m.rows[1], vec![1.0, 0.0]);
    }

    #[test]
    fn numeric_columns_copied() {
        let d = parse_csv("x,y\n1,2\n3,4", None).unwrap();
        let m = one_hot_encode(&d);
        assert_eq!(m.labels, vec!["x", "y"]);
        assert_eq!(m.rows, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    }

    #[test]
    fn mixed_layout_preserves_feature_order() {
        let d = parse_csv("x,g,y\n1,b,5\n2,a,6", None).unwrap();
        let m = one_hot_encode(&d);
        assert_eq!(m.labels, vec!["x", "g=a", "g=b", "y"]);
        assert_eq!(m.rows[0], vec![1.0, 0.0, 1.0, 5.0]);
        assert_eq!(m.rows[1], vec![2.0, 1.0, 0.0, 6.0]);
    }

    #[test]
    fn indicator_block_rows_sum_to_one() {
        let d = parse_csv("g,h\na,x\nb,y\nc,x\na,z", None).unwrap();
        let m = one_hot_encode(&d);
        // g expands to 3 columns, h to 3 columns.
        for row in &m.rows {
            assert_eq!(row[0..3].iter().sum::<f64>(), 1.0);
            assert_eq!(row[3..6].iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn row_count_preserved() {
        let d = parse_csv("x,g\n1,a\n2,b\n3,a\n4,c\n5,b", None).unwrap();
        assert_eq!(one_hot_encode(&d).n_rows(), d.n_rows());
    }
}
