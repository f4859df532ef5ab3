//! Per-neuron running statistics and Monosemanticity Scores.
//!
//! For a neuron with outputs `z_1..z_n`, the score of one output is
//! `(z_i - mean)^2 / S^2` with `S^2` the sample variance (`n - 1`
//! denominator). The bank keeps Welford's running mean and squared-deviation
//! sum so the score of each incoming activation costs O(1) per neuron.
//! Statistics are cumulative for the lifetime of a bank and never reset.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::{self, ScoreGuard};

/// Which statistics an incoming activation is scored against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreMode {
    /// Statistics after folding in the activation. At the end of a stream
    /// this reproduces the batch score of the last sample exactly.
    #[default]
    PostUpdate,
    /// Statistics of the strictly earlier samples only.
    Causal,
}

/// Scores for one activation vector with a per-neuron validity flag.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MsVector {
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl MsVector {
    pub fn with_len(n: usize) -> Self {
        MsVector {
            values: vec![0.0; n],
            valid: vec![false; n],
        }
    }

    /// Every entry valid.
    pub fn from_values(values: Vec<f64>) -> Self {
        let valid = vec![true; values.len()];
        MsVector { values, valid }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Valid scores in neuron order.
    pub fn valid_values(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.valid)
            .filter_map(|(&v, &ok)| ok.then_some(v))
            .collect()
    }
}

/// Running count, mean and squared-deviation sum for a layer of neurons.
///
/// All neurons receive a value on every update, so they share one count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronStatsBank {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
    #[serde(skip, default)]
    guard: ScoreGuard,
}

impl NeuronStatsBank {
    pub fn new(n_neurons: usize) -> Result<Self> {
        if n_neurons == 0 {
            return Err(invalid("a stats bank needs at least one neuron"));
        }
        Ok(NeuronStatsBank {
            count: 0,
            mean: vec![0.0; n_neurons],
            m2: vec![0.0; n_neurons],
            guard: ScoreGuard::default(),
        })
    }

    pub fn with_guard(mut self, guard: ScoreGuard) -> Self {
        self.guard = guard;
        self
    }

    pub fn guard(&self) -> ScoreGuard {
        self.guard
    }

    pub fn n_neurons(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn means(&self) -> &[f64] {
        &self.mean
    }

    pub fn m2(&self) -> &[f64] {
        &self.m2
    }

    /// Sample variance of one neuron, `None` below two observations.
    pub fn variance(&self, neuron: usize) -> Option<f64> {
        (self.count >= 2).then(|| self.m2[neuron] / (self.count - 1) as f64)
    }

    pub fn variances(&self) -> Option<Vec<f64>> {
        (self.count >= 2).then(|| {
            let d = (self.count - 1) as f64;
            self.m2.iter().map(|s| s / d).collect()
        })
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n_neurons() {
            return Err(invalid(format!(
                "activation length {len} does not match bank width {}",
                self.n_neurons()
            )));
        }
        Ok(())
    }

    /// Folds one activation vector into the statistics.
    pub fn update<T: Copy + Into<f64> + Sync>(&mut self, activations: &[T]) -> Result<()> {
        self.check_len(activations.len())?;
        self.count += 1;
        kernels::welford_update(self.count, &mut self.mean, &mut self.m2, activations);
        Ok(())
    }

    /// Folds one activation vector into the statistics and scores it.
    pub fn update_and_score<T: Copy + Into<f64> + Sync>(
        &mut self,
        activations: &[T],
        mode: ScoreMode,
    ) -> Result<MsVector> {
        let mut out = MsVector::with_len(self.n_neurons());
        self.update_and_score_into(activations, mode, &mut out)?;
        Ok(out)
    }

    /// As [`update_and_score`](Self::update_and_score), reusing `out`.
    pub fn update_and_score_into<T: Copy + Into<f64> + Sync>(
        &mut self,
        activations: &[T],
        mode: ScoreMode,
        out: &mut MsVector,
    ) -> Result<()> {
        self.check_len(activations.len())?;
        out.values.resize(self.n_neurons(), 0.0);
        out.valid.resize(self.n_neurons(), false);
        self.count += 1;
        kernels::welford_score(
            self.count,
            &mut self.mean,
            &mut self.m2,
            activations,
            &mut out.values,
            &mut out.valid,
            mode,
            self.guard,
        );
        Ok(())
    }

    /// Scores a vector against the current statistics without updating them.
    pub fn score(&self, activations: &[f64]) -> Result<MsVector> {
        self.check_len(activations.len())?;
        let (values, valid) = activations
            .iter()
            .enumerate()
            .map(|(j, &v)| kernels::score_one(v, self.count, self.mean[j], self.m2[j], self.guard))
            .unzip();
        Ok(MsVector { values, valid })
    }

    /// Combines two banks as if their streams had been concatenated.
    pub fn merge(&self, other: &NeuronStatsBank) -> Result<NeuronStatsBank> {
        if self.n_neurons() != other.n_neurons() {
            return Err(invalid(format!(
                "cannot merge banks of width {} and {}",
                self.n_neurons(),
                other.n_neurons()
            )));
        }
        if other.count == 0 {
            return Ok(self.clone());
        }
        if self.count == 0 {
            return Ok(other.clone().with_guard(self.guard));
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let mut mean = Vec::with_capacity(self.n_neurons());
        let mut m2 = Vec::with_capacity(self.n_neurons());
        for j in 0..self.n_neurons() {
            let delta = other.mean[j] - self.mean[j];
            mean.push(self.mean[j] + delta * (nb / n));
            m2.push(self.m2[j] + other.m2[j] + delta * delta * (na * nb / n));
        }
        Ok(NeuronStatsBank {
            count: self.count + other.count,
            mean,
            m2,
            guard: self.guard,
        })
    }
}

/// Free-function form of [`NeuronStatsBank::merge`].
pub fn merge_banks(a: &NeuronStatsBank, b: &NeuronStatsBank) -> Result<NeuronStatsBank> {
    a.merge(b)
}

/// Two-pass mean and sample variance.
pub fn two_pass_mean_var(values: &[f64]) -> Option<(f64, f64)> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Some((mean, ss / (n - 1.0)))
}

/// Scores of every sample against statistics of the whole list.
pub fn retrospective_ms(values: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; values.len()];
    retrospective_ms_into(values, &mut out)?;
    Ok(out)
}

pub(crate) fn retrospective_ms_into(values: &[f64], out: &mut [f64]) -> Result<()> {
    let floor = ScoreGuard::default().variance_floor;
    let (mean, var) = two_pass_mean_var(values)
        .ok_or_else(|| Error::DegenerateNeuron(format!("{} samples, need at least 2", values.len())))?;
    if !(var >= floor) {
        return Err(Error::DegenerateNeuron(format!("sample variance {var:e} below floor")));
    }
    for (o, &v) in out.iter_mut().zip(values) {
        *o = (v - mean) * (v - mean) / var;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn create_bank() {
        let b = NeuronStatsBank::new(4).unwrap();
        assert_eq!(b.n_neurons(), 4);
        assert_eq!(b.count(), 0);
        assert!(b.means().iter().all(|&m| m == 0.0));
        assert!(b.m2().iter().all(|&m| m == 0.0));
        assert!(matches!(NeuronStatsBank::new(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn bank_at_large_layer_width() {
        let mut b = NeuronStatsBank::new(5_242_880).unwrap();
        let x = vec![1.0f32; 5_242_880];
        b.update(&x).unwrap();
        assert_eq!(b.count(), 1);
        assert_eq!(b.means()[5_242_879], 1.0);
    }

    #[test]
    fn zero_then_two() {
        let mut b = NeuronStatsBank::new(1).unwrap();
        let first = b.update_and_score(&[0.0], ScoreMode::PostUpdate).unwrap();
        assert!(!first.valid[0]);
        b.update(&[2.0]).unwrap();
        assert_eq!(b.means()[0], 1.0);
        assert_eq!(b.variance(0), Some(2.0));
        let ms = b.score(&[0.0]).unwrap();
        assert_eq!(ms.values[0], 0.5);
        assert!(ms.valid[0]);
    }

    #[test]
    fn last_sample_matches_batch_score() {
        let xs = [0.3, -1.2, 4.0, 2.5, 0.0];
        let mut b = NeuronStatsBank::new(1).unwrap();
        let mut last = MsVector::default();
        for x in xs {
            last = b.update_and_score(&[x], ScoreMode::PostUpdate).unwrap();
        }
        let retro = retrospective_ms(&xs).unwrap();
        assert!((last.values[0] - retro[4]).abs() < 1e-12);
    }

    #[test]
    fn value_at_mean_scores_zero() {
        let mut b = NeuronStatsBank::new(1).unwrap();
        b.update(&[1.0]).unwrap();
        b.update(&[3.0]).unwrap();
        let ms = b.update_and_score(&[2.0], ScoreMode::PostUpdate).unwrap();
        assert_eq!(ms.values[0], 0.0);
        assert!(ms.valid[0]);
    }

    #[test]
    fn constant_stream_is_invalid() {
        let mut b = NeuronStatsBank::new(2).unwrap();
        for _ in 0..10 {
            let ms = b.update_and_score(&[7.0, 7.0], ScoreMode::PostUpdate).unwrap();
            assert_eq!(ms.valid, vec![false, false]);
        }
    }

    #[test]
    fn causal_mode_uses_earlier_samples() {
        let mut b = NeuronStatsBank::new(1).unwrap();
        b.update(&[0.0]).unwrap();
        b.update(&[2.0]).unwrap();
        // earlier stats: mean 1, S^2 2 -> (4 - 1)^2 / 2
        let ms = b.update_and_score(&[4.0], ScoreMode::Causal).unwrap();
        assert_eq!(ms.values[0], 4.5);
        let mut b = NeuronStatsBank::new(1).unwrap();
        b.update(&[0.0]).unwrap();
        let ms = b.update_and_score(&[2.0], ScoreMode::Causal).unwrap();
        assert!(!ms.valid[0]);
    }

    #[test]
    fn length_mismatch() {
        let mut b = NeuronStatsBank::new(3).unwrap();
        assert!(matches!(
            b.update_and_score(&[1.0, 2.0], ScoreMode::PostUpdate),
            Err(Error::InvalidArgument(_))
        ));
        assert_eq!(b.count(), 0);
    }

    #[test]
    fn retrospective_examples() {
        assert_eq!(retrospective_ms(&[0.0, 2.0]).unwrap(), vec![0.5, 0.5]);
        assert!(matches!(retrospective_ms(&[3.0, 3.0, 3.0]), Err(Error::DegenerateNeuron(_))));
        assert!(matches!(retrospective_ms(&[3.0]), Err(Error::DegenerateNeuron(_))));
    }

    #[test]
    fn merge_small() {
        let mut a = NeuronStatsBank::new(1).unwrap();
        a.update(&[0.0]).unwrap();
        let mut b = NeuronStatsBank::new(1).unwrap();
        b.update(&[2.0]).unwrap();
        let mut both = NeuronStatsBank::new(1).unwrap();
        both.update(&[0.0]).unwrap();
        both.update(&[2.0]).unwrap();
        assert_eq!(merge_banks(&a, &b).unwrap(), both);

        let empty = NeuronStatsBank::new(1).unwrap();
        assert_eq!(merge_banks(&both, &empty).unwrap(), both);
        assert_eq!(merge_banks(&empty, &both).unwrap(), both);
        assert!(merge_banks(&both, &NeuronStatsBank::new(2).unwrap()).is_err());
    }
}
