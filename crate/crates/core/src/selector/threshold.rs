use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels;
use crate::stats::MsVector;

/// The `k`-th largest element (1-based, duplicates counted).
pub fn kth_largest(values: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k > values.len() {
        return Err(invalid(format!("rank {k} out of range for {} values", values.len())));
    }
    let mut buf = values.to_vec();
    Ok(kth_largest_in_place(&mut buf, k))
}

/// Reorders `buf`; caller guarantees `1 <= k <= buf.len()`.
pub(crate) fn kth_largest_in_place(buf: &mut [f64], k: usize) -> f64 {
    let (_, kth, _) = buf.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
    *kth
}

/// Marks every valid entry at or above the exact k-th largest valid score.
/// Ties at the cut are all kept, so the population may exceed `k`.
pub fn exact_topk_mask(ms: &MsVector, k: usize) -> Result<Vec<bool>> {
    let mut vals = ms.valid_values();
    if k == 0 || k > vals.len() {
        return Err(invalid(format!(
            "top-{k} needs at least {k} valid entries, have {}",
            vals.len()
        )));
    }
    let tau = kth_largest_in_place(&mut vals, k);
    let mut mask = vec![false; ms.len()];
    kernels::threshold_mask(&ms.values, &ms.valid, tau, &mut mask);
    Ok(mask)
}

/// Per-layer moving threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovingThreshold {
    tau_star: f64,
    k_target: usize,
    n_neurons: usize,
    warmup_batches: usize,
    warmup_remaining: usize,
    warmup_sum: f64,
    last_k_star: Option<usize>,
    /// Running `sum(k* - k)` over post-warm-up batches.
    offset_sum: i64,
    updates: u64,
}

impl MovingThreshold {
    pub fn new(n_neurons: usize, k_target: usize, warmup_batches: usize) -> Result<Self> {
        if n_neurons == 0 {
            return Err(invalid("threshold over zero neurons"));
        }
        if k_target == 0 || k_target > n_neurons {
            return Err(invalid(format!("target {k_target} outside 1..={n_neurons}")));
        }
        if warmup_batches == 0 {
            return Err(invalid("at least one warm-up batch is required"));
        }
        Ok(MovingThreshold {
            tau_star: 0.0,
            k_target,
            n_neurons,
            warmup_batches,
            warmup_remaining: warmup_batches,
            warmup_sum: 0.0,
            last_k_star: None,
            offset_sum: 0,
            updates: 0,
        })
    }

    /// Target `k = max(1, round(rate * n_neurons))`.
    pub fn from_rate(n_neurons: usize, rate: f64, warmup_batches: usize) -> Result<Self> {
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(invalid(format!("rate {rate} outside (0, 1]")));
        }
        let k = ((rate * n_neurons as f64).round() as usize).clamp(1, n_neurons.max(1));
        Self::new(n_neurons, k, warmup_batches)
    }

    pub fn tau_star(&self) -> f64 {
        self.tau_star
    }

    pub fn k_target(&self) -> usize {
        self.k_target
    }

    pub fn n_neurons(&self) -> usize {
        self.n_neurons
    }

    pub fn warmup_remaining(&self) -> usize {
        self.warmup_remaining
    }

    pub fn is_warm(&self) -> bool {
        self.warmup_remaining == 0
    }

    /// Mean of the k-th largest values seen so far during warm-up.
    pub fn warmup_mean(&self) -> Option<f64> {
        let seen = self.warmup_batches - self.warmup_remaining;
        (seen > 0).then(|| self.warmup_sum / seen as f64)
    }

    pub fn last_k_star(&self) -> Option<usize> {
        self.last_k_star
    }

    pub fn offset_sum(&self) -> i64 {
        self.offset_sum
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    fn check_len(&self, ms: &MsVector) -> Result<()> {
        if ms.len() != self.n_neurons {
            return Err(invalid(format!(
                "score vector of length {} for a threshold over {} neurons",
                ms.len(),
                self.n_neurons
            )));
        }
        Ok(())
    }

    /// Feeds one warm-up batch: records its exact k-th largest valid score.
    pub fn warmup_observe(&mut self, ms: &MsVector) -> Result<()> {
        if self.warmup_remaining == 0 {
            return Err(invalid("warm-up already complete"));
        }
        self.check_len(ms)?;
        let mut vals = ms.valid_values();
        if vals.len() < self.k_target {
            return Err(Error::InsufficientValidNeurons {
                valid: vals.len(),
                needed: self.k_target,
            });
        }
        self.warmup_sum += kth_largest_in_place(&mut vals, self.k_target);
        self.warmup_remaining -= 1;
        if self.warmup_remaining == 0 {
            self.tau_star = self.warmup_sum / self.warmup_batches as f64;
        }
        Ok(())
    }

    /// Selects valid entries with `score >= tau*` and then applies
    /// `tau* += (k* - k) / N`. Returns the mask.
    pub fn select(&mut self, ms: &MsVector) -> Result<Vec<bool>> {
        let mut mask = vec![false; ms.len()];
        self.select_into(ms, &mut mask)?;
        Ok(mask)
    }

    /// As [`select`](Self::select), writing into `mask`; returns `k*`.
    pub fn select_into(&mut self, ms: &MsVector, mask: &mut Vec<bool>) -> Result<usize> {
        self.select_with(ms, mask, kernels::threshold_mask)
    }

    /// Single-threaded selection regardless of the `parallel` feature.
    pub fn select_into_seq(&mut self, ms: &MsVector, mask: &mut Vec<bool>) -> Result<usize> {
        self.select_with(ms, mask, kernels::threshold_mask_seq)
    }

    fn select_with(
        &mut self,
        ms: &MsVector,
        mask: &mut Vec<bool>,
        kernel: fn(&[f64], &[bool], f64, &mut [bool]) -> usize,
    ) -> Result<usize> {
        if self.warmup_remaining > 0 {
            return Err(Error::WarmupIncomplete {
                remaining: self.warmup_remaining,
            });
        }
        self.check_len(ms)?;
        mask.resize(ms.len(), false);
        let k_star = kernel(&ms.values, &ms.valid, self.tau_star, mask);
        self.apply_update(k_star);
        Ok(k_star)
    }

    fn apply_update(&mut self, k_star: usize) {
        let diff = k_star as i64 - self.k_target as i64;
        self.tau_star += diff as f64 / self.n_neurons as f64;
        self.offset_sum += diff;
        self.updates += 1;
        self.last_k_star = Some(k_star);
    }

    /// Warm-up while warming, selection afterwards. `None` during warm-up.
    pub fn observe(&mut self, ms: &MsVector) -> Result<Option<Vec<bool>>> {
        if self.is_warm() {
            self.select(ms).map(Some)
        } else {
            self.warmup_observe(ms).map(|_| None)
        }
    }
}
