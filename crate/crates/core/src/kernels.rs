//! Element-wise kernels shared by the statistics bank and the selector.
//!
//! Every kernel has a `_seq` form and, with the `parallel` feature, a `_par`
//! form that splits the neuron range into fixed chunks and runs the
//! sequential kernel on each chunk. Per-element arithmetic is identical in
//! both forms, so results are bitwise equal regardless of thread count.
//! The unsuffixed dispatchers pick the parallel form for long inputs.

use crate::stats::ScoreMode;

/// Inputs shorter than this stay on the calling thread.
pub const PAR_MIN_LEN: usize = 1 << 15;

/// Chunk length handed to each rayon task.
pub const PAR_CHUNK: usize = 1 << 13;

/// Validity guards applied when converting statistics into scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreGuard {
    pub min_count: u64,
    pub variance_floor: f64,
}

impl Default for ScoreGuard {
    fn default() -> Self {
        ScoreGuard {
            min_count: 2,
            variance_floor: 1e-12,
        }
    }
}

/// Folds one observation per neuron into `(mean, m2)` and writes the score
/// of that observation into `scores` / `valid`.
///
/// `count` is the number of observations *including* this one.
#[allow(clippy::too_many_arguments)]
pub fn welford_score_seq<T: Copy + Into<f64>>(
    count: u64,
    mean: &mut [f64],
    m2: &mut [f64],
    x: &[T],
    scores: &mut [f64],
    valid: &mut [bool],
    mode: ScoreMode,
    guard: ScoreGuard,
) {
    let n = count as f64;
    let prev = count - 1;
    for i in 0..x.len() {
        let v: f64 = x[i].into();
        let old_mean = mean[i];
        let old_m2 = m2[i];
        let delta = v - old_mean;
        let new_mean = old_mean + delta / n;
        let new_m2 = old_m2 + delta * (v - new_mean);
        mean[i] = new_mean;
        m2[i] = new_m2;

        let (c, mu, ss) = match mode {
            ScoreMode::PostUpdate => (count, new_mean, new_m2),
            ScoreMode::Causal => (prev, old_mean, old_m2),
        };
        let (s, ok) = score_one(v, c, mu, ss, guard);
        scores[i] = s;
        valid[i] = ok;
    }
}

#[inline]
pub(crate) fn score_one(v: f64, count: u64, mean: f64, m2: f64, guard: ScoreGuard) -> (f64, bool) {
    if count < guard.min_count || count < 2 {
        return (0.0, false);
    }
    let var = m2 / (count - 1) as f64;
    if !(var >= guard.variance_floor) {
        return (0.0, false);
    }
    let d = v - mean;
    let s = d * d / var;
    (s, s.is_finite())
}

/// Welford update without scoring.
pub fn welford_update_seq<T: Copy + Into<f64>>(count: u64, mean: &mut [f64], m2: &mut [f64], x: &[T]) {
    let n = count as f64;
    for ((m, s), &v) in mean.iter_mut().zip(m2.iter_mut()).zip(x) {
        let v: f64 = v.into();
        let delta = v - *m;
        *m += delta / n;
        *s += delta * (v - *m);
    }
}

/// Writes `valid && score >= tau` into `mask`; returns the population count.
pub fn threshold_mask_seq(scores: &[f64], valid: &[bool], tau: f64, mask: &mut [bool]) -> usize {
    let mut hits = 0usize;
    for ((m, &s), &ok) in mask.iter_mut().zip(scores).zip(valid) {
        let sel = ok && s >= tau;
        *m = sel;
        hits += sel as usize;
    }
    hits
}

/// Counts `valid && score >= tau` without materialising a mask.
pub fn threshold_count_seq(scores: &[f64], valid: &[bool], tau: f64) -> usize {
    scores
        .iter()
        .zip(valid)
        .filter(|(&s, &ok)| ok && s >= tau)
        .count()
}

#[cfg(feature = "parallel")]
mod par {
    use super::*;
    use rayon::prelude::*;

    #[allow(clippy::too_many_arguments)]
    pub fn welford_score_par<T: Copy + Into<f64> + Sync>(
        count: u64,
        mean: &mut [f64],
        m2: &mut [f64],
        x: &[T],
        scores: &mut [f64],
        valid: &mut [bool],
        mode: ScoreMode,
        guard: ScoreGuard,
    ) {
        (
            mean.par_chunks_mut(PAR_CHUNK),
            m2.par_chunks_mut(PAR_CHUNK),
            x.par_chunks(PAR_CHUNK),
            scores.par_chunks_mut(PAR_CHUNK),
            valid.par_chunks_mut(PAR_CHUNK),
        )
            .into_par_iter()
            .for_each(|(m, s, x, o, v)| welford_score_seq(count, m, s, x, o, v, mode, guard));
    }

    pub fn welford_update_par<T: Copy + Into<f64> + Sync>(
        count: u64,
        mean: &mut [f64],
        m2: &mut [f64],
        x: &[T],
    ) {
        (
            mean.par_chunks_mut(PAR_CHUNK),
            m2.par_chunks_mut(PAR_CHUNK),
            x.par_chunks(PAR_CHUNK),
        )
            .into_par_iter()
            .for_each(|(m, s, x)| welford_update_seq(count, m, s, x));
    }

    pub fn threshold_mask_par(scores: &[f64], valid: &[bool], tau: f64, mask: &mut [bool]) -> usize {
        (
            scores.par_chunks(PAR_CHUNK),
            valid.par_chunks(PAR_CHUNK),
            mask.par_chunks_mut(PAR_CHUNK),
        )
            .into_par_iter()
            .map(|(s, v, m)| threshold_mask_seq(s, v, tau, m))
            .sum()
    }

    pub fn threshold_count_par(scores: &[f64], valid: &[bool], tau: f64) -> usize {
        scores
            .par_chunks(PAR_CHUNK)
            .zip(valid.par_chunks(PAR_CHUNK))
            .map(|(s, v)| threshold_count_seq(s, v, tau))
            .sum()
    }
}

#[cfg(feature = "parallel")]
pub use par::*;

#[allow(clippy::too_many_arguments)]
pub fn welford_score<T: Copy + Into<f64> + Sync>(
    count: u64,
    mean: &mut [f64],
    m2: &mut [f64],
    x: &[T],
    scores: &mut [f64],
    valid: &mut [bool],
    mode: ScoreMode,
    guard: ScoreGuard,
) {
    #[cfg(feature = "parallel")]
    if x.len() >= PAR_MIN_LEN {
        return welford_score_par(count, mean, m2, x, scores, valid, mode, guard);
    }
    welford_score_seq(count, mean, m2, x, scores, valid, mode, guard)
}

pub fn welford_update<T: Copy + Into<f64> + Sync>(count: u64, mean: &mut [f64], m2: &mut [f64], x: &[T]) {
    #[cfg(feature = "parallel")]
    if x.len() >= PAR_MIN_LEN {
        return welford_update_par(count, mean, m2, x);
    }
    welford_update_seq(count, mean, m2, x)
}

pub fn threshold_mask(scores: &[f64], valid: &[bool], tau: f64, mask: &mut [bool]) -> usize {
    #[cfg(feature = "parallel")]
    if scores.len() >= PAR_MIN_LEN {
        return threshold_mask_par(scores, valid, tau, mask);
    }
    threshold_mask_seq(scores, valid, tau, mask)
}

pub fn threshold_count(scores: &[f64], valid: &[bool], tau: f64) -> usize {
    #[cfg(feature = "parallel")]
    if scores.len() >= PAR_MIN_LEN {
        return threshold_count_par(scores, valid, tau);
    }
    threshold_count_seq(scores, valid, tau)
}
