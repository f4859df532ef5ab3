//! Per-batch cost of moving-threshold selection against exact top-k by full
//! sort (`O(N log N)`) and by a bounded min-heap (`O(N log k)`).
//!
//! All strategies run single-threaded on the same generated batches so the
//! comparison reflects algorithmic cost only.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kernels::threshold_mask_seq;
use crate::stats::MsVector;

use super::threshold::MovingThreshold;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub n_neurons: usize,
    pub rate: f64,
    pub batches: usize,
    pub warmup_batches: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            n_neurons: 1 << 20,
            rate: 0.02,
            batches: 100,
            warmup_batches: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyTiming {
    pub strategy: String,
    pub n_neurons: usize,
    pub rate: f64,
    pub batches: usize,
    pub mean_ms: f64,
    pub stddev_ms: f64,
    pub mean_k_star: f64,
}

#[derive(PartialEq)]
struct Total(f64);

impl Eq for Total {}

impl PartialOrd for Total {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Total {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Exact top-k via descending full sort of a scratch copy.
fn sort_select(ms: &MsVector, k: usize, scratch: &mut Vec<f64>, mask: &mut [bool]) -> usize {
    scratch.clear();
    scratch.extend(
        ms.values
            .iter()
            .zip(&ms.valid)
            .filter_map(|(&v, &ok)| ok.then_some(v)),
    );
    scratch.sort_unstable_by(|a, b| b.total_cmp(a));
    threshold_mask_seq(&ms.values, &ms.valid, scratch[k - 1], mask)
}

/// Exact top-k via a min-heap holding the k largest seen so far.
fn heap_select(ms: &MsVector, k: usize, heap: &mut BinaryHeap<Reverse<Total>>, mask: &mut [bool]) -> usize {
    heap.clear();
    for (&v, &ok) in ms.values.iter().zip(&ms.valid) {
        if !ok {
            continue;
        }
        if heap.len() < k {
            heap.push(Reverse(Total(v)));
        } else if let Some(mut top) = heap.peek_mut() {
            if v > top.0 .0 {
                *top = Reverse(Total(v));
            }
        }
    }
    let tau = heap.peek().map(|r| r.0 .0).unwrap_or(f64::INFINITY);
    threshold_mask_seq(&ms.values, &ms.valid, tau, mask)
}

/// Stationary score stream: squared standard normals, i.e. the score
/// distribution of a Gaussian neuron.
fn fill_batch(rng: &mut ChaCha8Rng, ms: &mut MsVector) {
    for v in ms.values.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *v = z * z;
    }
}

fn summarize(name: &str, cfg: &BenchConfig, times: &[f64], k_stars: &[usize]) -> StrategyTiming {
    let n = times.len() as f64;
    let mean = times.iter().sum::<f64>() / n;
    let var = if times.len() > 1 {
        times.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    StrategyTiming {
        strategy: name.to_string(),
        n_neurons: cfg.n_neurons,
        rate: cfg.rate,
        batches: cfg.batches,
        mean_ms: mean,
        stddev_ms: var.sqrt(),
        mean_k_star: k_stars.iter().sum::<usize>() as f64 / n,
    }
}

/// Runs the three strategies over `cfg.batches` identical batches and
/// returns one timing row per strategy: `moving-threshold`, `sort`, `heap`.
pub fn bench_selection(cfg: &BenchConfig) -> Result<Vec<StrategyTiming>> {
    if cfg.n_neurons == 0 {
        return Err(invalid("bench needs at least one neuron"));
    }
    if cfg.batches == 0 {
        return Err(invalid("bench needs at least one batch"));
    }
    let mut thr = MovingThreshold::from_rate(cfg.n_neurons, cfg.rate, cfg.warmup_batches.max(1))?;
    let k = thr.k_target();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ms = MsVector::from_values(vec![0.0; cfg.n_neurons]);

    while !thr.is_warm() {
        fill_batch(&mut rng, &mut ms);
        thr.warmup_observe(&ms)?;
    }

    let mut mask = vec![false; cfg.n_neurons];
    let mut scratch = Vec::with_capacity(cfg.n_neurons);
    let mut heap = BinaryHeap::with_capacity(k + 1);
    let mut times = [vec![], vec![], vec![]];
    let mut k_stars = [vec![], vec![], vec![]];

    for _ in 0..cfg.batches {
        fill_batch(&mut rng, &mut ms);

        let t = Instant::now();
        let c = thr.select_into_seq(&ms, &mut mask)?;
        times[0].push(t.elapsed().as_secs_f64() * 1e3);
        k_stars[0].push(c);

        let t = Instant::now();
        let c = sort_select(&ms, k, &mut scratch, &mut mask);
        times[1].push(t.elapsed().as_secs_f64() * 1e3);
        k_stars[1].push(c);

        let t = Instant::now();
        let c = heap_select(&ms, k, &mut heap, &mut mask);
        times[2].push(t.elapsed().as_secs_f64() * 1e3);
        k_stars[2].push(c);
    }

    Ok(["moving-threshold", "sort", "heap"]
        .iter()
        .zip(times.iter().zip(&k_stars))
        .map(|(name, (t, k))| summarize(name, cfg, t, k))
        .collect())
}
