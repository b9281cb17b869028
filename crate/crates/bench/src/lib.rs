//! Synthetic data generators shared by the benchmark targets.

use tabaudit_core::dataset::parse_csv;
use tabaudit_core::{Dataset, DetRng, LabelVector};

/// A reproducible mixed-type dataset: two numeric features, one
/// categorical group column, plus binary labels correlated with `x0`.
pub fn synthetic(n_rows: usize, seed: u64) -> (Dataset, LabelVector) {
    let mut rng = DetRng::new(seed);
    let mut csv = String::from("x0,x1,group\n");
    let mut labels = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let x0 = rng.next_f64() * 10.0 - 5.0;
        let x1 = rng.next_f64() * 2.0;
        let group = if rng.next_f64() < 0.5 { "a" } else { "b" };
        csv.push_str(&format!("{x0:.6},{x1:.6},{group}\n"));
        // Noisy threshold on x0 keeps the labels learnable but not
        // degenerate.
        let noisy = x0 + rng.next_normal() * 0.5;
        labels.push(if noisy > 0.0 { "yes" } else { "no" }.to_string());
    }
    let dataset = parse_csv(&csv, None).expect("generated csv is valid");
    let labels = LabelVector::new(labels).expect("generated labels are valid");
    (dataset, labels)
}
