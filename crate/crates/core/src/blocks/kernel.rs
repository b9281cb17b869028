//! Exponential locality kernel: turns distances into sample weights.

use super::BlockError;

/// Default kernel width on [0,1]-normalized distances. Weight decays to
/// e⁻¹ at a quarter of the maximum distance, which keeps the emphasis
/// genuinely local.
pub const DEFAULT_KERNEL_WIDTH: f64 = 0.25;

/// exp(−distance² / width²). Distances must be non-negative and the
/// width strictly positive.
pub fn exponential_kernel(distance: f64, width: f64) -> Result<f64, BlockError> {
    if width <= 0.0 || !width.is_finite() {
        return Err(BlockError::NonPositiveWidth(width));
    }
    if distance.is_nan() || distance < 0.0 {
        return Err(BlockError::InvalidConfig(format!(
            "distance must be non-negative, got {distance}"
        )));
    }
    Ok((-(distance * distance) / (width * width)).exp())
}
