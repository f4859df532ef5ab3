//! Log-stabilised monosemanticity penalty.
//!
//! For a selected (input, neuron) entry with output `z` and running mean
//! `zbar` the penalty is `log((z - zbar)^2 + eps)`. The variance term of the
//! score only shifts the log by a constant and is dropped. `zbar` is a
//! detached statistic: no gradient flows into the running statistics.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Loss weights used for 2.8B, 410M and 70M parameter language models.
pub mod presets {
    pub const LAMBDA_2_8B: f64 = 1e-9;
    pub const LAMBDA_410M: f64 = 1e-10;
    pub const LAMBDA_70M: f64 = 1e-11;
}

pub const DEFAULT_RATE: f64 = 0.02;
pub const DEFAULT_LAMBDA: f64 = 1e-3;
pub const DEFAULT_EPSILON: f64 = 1e-8;
pub const DEFAULT_WARMUP_BATCHES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InhibitionConfig {
    /// Fraction of entries per hooked layer to inhibit.
    pub rate: f64,
    pub lambda: f64,
    pub epsilon: f64,
    /// `None` resolves to the middle two layers of the network.
    pub hooked_layers: Option<Vec<usize>>,
    pub warmup_batches: usize,
}

impl Default for InhibitionConfig {
    fn default() -> Self {
        InhibitionConfig {
            rate: DEFAULT_RATE,
            lambda: DEFAULT_LAMBDA,
            epsilon: DEFAULT_EPSILON,
            hooked_layers: None,
            warmup_batches: DEFAULT_WARMUP_BATCHES,
        }
    }
}

impl InhibitionConfig {
    pub fn validate(&self, depth: usize) -> Result<()> {
        if !(self.rate > 0.0 && self.rate <= 1.0) {
            return Err(invalid(format!("inhibition rate {} outside (0, 1]", self.rate)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!("lambda {} must be finite and >= 0", self.lambda)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(invalid(format!("epsilon {} must be > 0", self.epsilon)));
        }
        if self.warmup_batches == 0 {
            return Err(invalid("warmup_batches must be >= 1"));
        }
        if let Some(layers) = &self.hooked_layers {
            if layers.is_empty() {
                return Err(invalid("hooked_layers is empty"));
            }
            if let Some(&l) = layers.iter().find(|&&l| l >= depth) {
                return Err(invalid(format!("hooked layer {l} outside depth {depth}")));
            }
        }
        Ok(())
    }
}

/// Mean of `log((z - zbar)^2 + eps)` over the given entries; 0 when empty.
pub fn ms_loss(values: &[f64], means: &[f64], epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(invalid(format!("epsilon {epsilon} must be > 0")));
    }
    if values.len() != means.len() {
        return Err(invalid(format!("{} values but {} means", values.len(), means.len())));
    }
    if values.is_empty() {
        return Ok(0.0);
    }
    let sum = values
        .iter()
        .zip(means)
        .map(|(&z, &m)| ms_term(z, m, epsilon))
        .fold(0.0, |a, t| a + t);
    Ok(sum / values.len() as f64)
}

#[inline]
pub fn ms_term(value: f64, mean: f64, epsilon: f64) -> f64 {
    let d = value - mean;
    (d * d + epsilon).ln()
}

/// `d/dz log((z - zbar)^2 + eps) = 2 (z - zbar) / ((z - zbar)^2 + eps)`.
///
/// Bounded by `1 / sqrt(eps)` in magnitude.
#[inline]
pub fn ms_loss_grad(value: f64, mean: f64, epsilon: f64) -> f64 {
    let d = value - mean;
    2.0 * d / (d * d + epsilon)
}

pub fn combined_loss(task_loss: f64, ms_loss: f64, lambda: f64) -> f64 {
    task_loss + lambda * ms_loss
}
