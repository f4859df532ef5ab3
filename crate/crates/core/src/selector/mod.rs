//! Top-k% neuron selection and the False Killing Rate.
//!
//! Selection during training compares each score against a per-layer moving
//! threshold `tau*`. The threshold is warmed up with the mean of exact k-th
//! largest scores and afterwards nudged by `(k* - k) / N` per batch, where
//! `k*` is how many entries the batch actually selected. This negative
//! feedback drives the expected selection count towards `k` with O(1) work
//! beyond the element-wise comparison.

mod bench;
mod fkr;
mod threshold;

pub use bench::{bench_selection, BenchConfig, StrategyTiming};
pub use fkr::{fkr, fkr_curve, rate_to_k, FkrReport};
pub use threshold::{exact_topk_mask, kth_largest, MovingThreshold};
