use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::feature::FeatureDataset;

/// Gaussian clusters, one per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticFeatureTask {
    pub n_features: usize,
    pub input_dim: usize,
    pub n_samples: usize,
    /// Standard deviation of the per-coordinate noise around a center.
    pub noise: f64,
    /// Standard deviation of the cluster center coordinates.
    pub center_scale: f64,
    /// `None` falls back to the run seed.
    pub seed: Option<u64>,
}

impl Default for SyntheticFeatureTask {
    fn default() -> Self {
        SyntheticFeatureTask {
            n_features: 9,
            input_dim: 16,
            n_samples: 2000,
            noise: 1.0,
            center_scale: 1.0,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskData {
    pub train: FeatureDataset,
    pub eval: FeatureDataset,
    pub centers: Vec<Vec<f64>>,
}

/// Samples the task; the first 90% of the shuffled samples train, the rest
/// evaluate.
pub fn generate_task(cfg: &SyntheticFeatureTask, fallback_seed: u64) -> Result<TaskData> {
    if cfg.n_features < 2 {
        return Err(invalid("task needs at least 2 features"));
    }
    if cfg.input_dim < cfg.n_features {
        return Err(invalid(format!(
            "input_dim {} smaller than n_features {}",
            cfg.input_dim, cfg.n_features
        )));
    }
    if cfg.n_samples < 10 {
        return Err(invalid("task needs at least 10 samples"));
    }
    if !(cfg.noise >= 0.0) || !(cfg.center_scale > 0.0) {
        return Err(invalid("noise must be >= 0 and center_scale > 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.unwrap_or(fallback_seed));
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let centers: Vec<Vec<f64>> = (0..cfg.n_features)
        .map(|_| (0..cfg.input_dim).map(|_| normal() * cfg.center_scale).collect())
        .collect();

    let mut samples: Vec<(Vec<f64>, usize)> = (0..cfg.n_samples)
        .map(|_| {
            let l = rng.random_range(0..cfg.n_features);
            let x = centers[l]
                .iter()
                .map(|c| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    c + cfg.noise * z
                })
                .collect();
            (x, l)
        })
        .collect();
    samples.shuffle(&mut rng);

    let names: Vec<String> = (0..cfg.n_features).map(|f| format!("feature_{f}")).collect();
    let n_train = cfg.n_samples * 9 / 10;
    let eval_part = samples.split_off(n_train);
    let unzip = |s: Vec<(Vec<f64>, usize)>| -> (Vec<Vec<f64>>, Vec<usize>) { s.into_iter().unzip() };
    let (tx, ty) = unzip(samples);
    let (ex, ey) = unzip(eval_part);
    Ok(TaskData {
        train: FeatureDataset::new(tx, ty, names.clone())?,
        eval: FeatureDataset::new(ex, ey, names)?,
        centers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_split() {
        let cfg = SyntheticFeatureTask::default();
        let a = generate_task(&cfg, 3).unwrap();
        let b = generate_task(&cfg, 3).unwrap();
        assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
        assert_eq!(a.train.len(), 1800);
        assert_eq!(a.eval.len(), 200);
        assert_eq!(a.train.n_features(), 9);
        let c = generate_task(&cfg, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_dims() {
        let bad = SyntheticFeatureTask {
            n_features: 1,
            ..Default::default()
        };
        assert!(generate_task(&bad, 0).is_err());
        let bad = SyntheticFeatureTask {
            input_dim: 4,
            ..Default::default()
        };
        assert!(generate_task(&bad, 0).is_err());
    }
}
