//! Gaussian data augmentation around an anchor instance, used to build
//! local neighbourhoods for surrogate explanations and robustness probes.

use crate::dataset::{Dataset, FeatureKind, Value};
use crate::rng::DetRng;

use super::BlockError;

/// Default multiplier on the per-feature standard deviation.
pub const DEFAULT_SPREAD: f64 = 1.0;

/// Sampling parameters for [`gaussian_augment`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub n_samples: usize,
    pub seed: u64,
    /// Multiplier on each numeric feature's standard deviation.
    pub numeric_spread: f64,
}

impl SamplerConfig {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        SamplerConfig {
            n_samples,
            seed,
            numeric_spread: DEFAULT_SPREAD,
        }
    }

    pub fn with_spread(mut self, spread: f64) -> Self {
        self.numeric_spread = spread;
        self
    }
}

/// Population standard deviation (divisor n, not n−1).
fn population_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    var.sqrt()
}

/// Draws `cfg.n_samples` synthetic rows around `anchor`. Numeric feature
/// `j` is sampled from Normal(anchorⱼ, spread·σⱼ) with σⱼ the population
/// standard deviation of column `j` in `d` (σⱼ = 0 keeps the anchor value
/// verbatim); categorical features are sampled from the empirical token
/// frequencies of `d`. Each sample draws from its own substream of
/// `cfg.seed`, so output is reproducible bit-for-bit and sample `i` does
/// not depend on how many other samples are requested before it.
pub fn gaussian_augment(
    d: &Dataset,
    anchor: &[Value],
    cfg: &SamplerConfig,
) -> Result<Dataset, BlockError> {
    if cfg.n_samples == 0 {
        return Err(BlockError::InvalidConfig(
            "n_samples must be at least 1".to_string(),
        ));
    }
    if !cfg.numeric_spread.is_finite() || cfg.numeric_spread < 0.0 {
        return Err(BlockError::InvalidConfig(format!(
            "numeric_spread must be finite and non-negative, got {}",
            cfg.numeric_spread
        )));
    }
    if anchor.len() != d.n_features() {
        return Err(BlockError::SchemaMismatch(format!(
            "anchor has {} cells, schema has {} features",
            anchor.len(),
            d.n_features()
        )));
    }
    for (j, feature) in d.schema().features().iter().enumerate() {
        if anchor[j].kind() != feature.kind {
            return Err(BlockError::SchemaMismatch(format!(
                "anchor cell for `{}` has the wrong kind",
                feature.name
            )));
        }
    }

    // Per-feature sampling parameters derived from the reference data.
    enum Sampler {
        Normal { mean: f64, sd: f64 },
        Frequencies { tokens: Vec<(String, usize)> },
    }
    let samplers: Vec<Sampler> = d
        .schema()
        .features()
        .iter()
        .enumerate()
        .map(|(j, feature)| match feature.kind {
            FeatureKind::Numeric => {
                let column = d.numeric_column(j).expect("numeric feature");
                Sampler::Normal {
                    mean: anchor[j].as_number().expect("kind checked"),
                    sd: cfg.numeric_spread * population_sd(&column),
                }
            }
            FeatureKind::Categorical => {
                let mut tokens: Vec<(String, usize)> = Vec::new();
                for v in d.column(j) {
                    let token = v.as_category().expect("kind checked");
                    match tokens.iter_mut().find(|(t, _)| t == token) {
                        Some((_, count)) => *count += 1,
                        None => tokens.push((token.to_string(), 1)),
                    }
                }
                tokens.sort_by(|a, b| a.0.cmp(&b.0));
                Sampler::Frequencies { tokens }
            }
        })
        .collect();

    let n_rows = d.n_rows() as f64;
    let mut rows = Vec::with_capacity(cfg.n_samples);
    for i in 0..cfg.n_samples {
        let mut rng = DetRng::substream(cfg.seed, i as u64);
        let row = samplers
            .iter()
            .map(|s| match s {
                Sampler::Normal { mean, sd } => {
                    if *sd == 0.0 {
                        Value::Number(*mean)
                    } else {
                        Value::Number(mean + sd * rng.next_normal())
                    }
                }
                Sampler::Frequencies { tokens } => {
                    let target = rng.next_f64() * n_rows;
                    let mut cumulative = 0usize;
                    let mut chosen = tokens.last().expect("dataset is non-empty");
                    for entry in tokens {
                        cumulative += entry.1;
                        if (cumulative as f64) > target {
                            chosen = entry;
                            break;
                        }
                    }
                    Value::Category(chosen.0.clone())
                }
            })
            .collect();
        rows.push(row);
    }
    Dataset::new(d.schema().clone(), rows).map_err(|e| BlockError::SchemaMismatch(e.to_string()))
}
