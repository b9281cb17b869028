//! Weighted ridge regression: the inherently transparent local model
//! fitted by the surrogate explainer.

use super::BlockError;

/// Default ridge penalty.
pub const DEFAULT_RIDGE_LAMBDA: f64 = 1.0;

/// Linear model ŷ = intercept + xᵀ·weights, fitted by weighted ridge
/// regression. The weight count equals the encoded feature count.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub ridge_lambda: f64,
}

impl LinearModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.weights.len());
        self.intercept
            + x.iter()
                .zip(&self.weights)
                .map(|(xi, wi)| xi * wi)
                .sum::<f64>()
    }
}

/// Solves A·x = b for a small dense symmetric system by LU decomposition
/// with partial pivoting. A pivot within rounding error of zero means the
/// system is singular.
// Elimination reads one matrix row while writing another, which rules
// out iterator-based traversal.
#[allow(clippy::needless_range_loop)]
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>, BlockError> {
    let n = b.len();
    let norm = a
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0f64, |m, &v| m.max(v.abs()));
    let tolerance = 1e-12 * norm.max(1.0);
    for col in 0..n {
        let (pivot_row, pivot_abs) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).expect("finite pivots"))
            .expect("col < n");
        if pivot_abs <= tolerance {
            return Err(BlockError::SingularSystem);
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for r in col + 1..n {
            let factor = a[r][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= factor * a[col][c];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for c in col + 1..n {
            s -= a[col][c] * x[c];
        }
        x[col] = s / a[col][col];
    }
    Ok(x)
}

/// Fits ŷ = α + xᵀβ minimizing Σ wᵢ(yᵢ−ŷᵢ)² + λ‖β‖². The intercept is
/// unpenalized: features and targets are centred on their weighted means,
/// β solves (XᶜᵀWXᶜ + λI)β = XᶜᵀWyᶜ, and α = ȳ − x̄ᵀβ recovers the
/// intercept.
// Mirroring the upper triangle writes a[j][k] from a[k][j], which rules
// out iterator-based traversal.
#[allow(clippy::needless_range_loop)]
pub fn weighted_ridge_fit(
    x: &[Vec<f64>],
    y: &[f64],
    w: &[f64],
    lambda: f64,
) -> Result<LinearModel, BlockError> {
    if x.is_empty() {
        return Err(BlockError::ShapeMismatch(
            "design matrix has no rows".to_string(),
        ));
    }
    if x.len() != y.len() || x.len() != w.len() {
        return Err(BlockError::ShapeMismatch(format!(
            "X has {} rows, y has {}, w has {}",
            x.len(),
            y.len(),
            w.len()
        )));
    }
    let p = x[0].len();
    if x.iter().any(|row| row.len() != p) {
        return Err(BlockError::ShapeMismatch(
            "design matrix rows have unequal lengths".to_string(),
        ));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(BlockError::InvalidConfig(format!(
            "ridge lambda must be finite and non-negative, got {lambda}"
        )));
    }
    if w.iter().any(|&wi| !wi.is_finite() || wi < 0.0) {
        return Err(BlockError::DegenerateWeights);
    }
    let w_total: f64 = w.iter().sum();
    if w_total <= 0.0 {
        return Err(BlockError::DegenerateWeights);
    }

    // Weighted means of features and target.
    let mut x_mean = vec![0.0; p];
    let mut y_mean = 0.0;
    for (i, row) in x.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            x_mean[j] += w[i] * v;
        }
        y_mean += w[i] * y[i];
    }
    for m in &mut x_mean {
        *m /= w_total;
    }
    y_mean /= w_total;

    if p == 0 {
        return Ok(LinearModel {
            weights: Vec::new(),
            intercept: y_mean,
            ridge_lambda: lambda,
        });
    }

    // Normal equations on centred data: A = XᶜᵀWXᶜ + λI, b = XᶜᵀWyᶜ.
    let mut a = vec![vec![0.0; p]; p];
    let mut b = vec![0.0; p];
    for (i, row) in x.iter().enumerate() {
        let yc = y[i] - y_mean;
        for j in 0..p {
            let xj = row[j] - x_mean[j];
            b[j] += w[i] * xj * yc;
            for k in j..p {
                a[j][k] += w[i] * xj * (row[k] - x_mean[k]);
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            a[j][k] = a[k][j];
        }
        a[j][j] += lambda;
    }

    let beta = solve_dense(a, b)?;
    let intercept = y_mean - x_mean.iter().zip(&beta).map(|(m, b)| m * b).sum::<f64>();
    Ok(LinearModel {
        weights: beta,
        intercept,
        ridge_lambda: lambda,
    })
}
