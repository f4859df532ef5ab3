//! Independent oracles shared by the integration tests. Nothing here calls
//! into the implementation paths it is used to check.

#![allow(dead_code)]

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Two-pass mean and sample variance with compensated sums.
pub fn two_pass(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    let ss = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean)));
    (mean, ss / (n - 1.0))
}

/// Score of every sample by the defining formula.
pub fn direct_ms(values: &[f64]) -> Vec<f64> {
    let (mean, var) = two_pass(values);
    values.iter().map(|v| (v - mean) * (v - mean) / var).collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// k-th largest by full descending sort.
pub fn sort_kth(values: &[f64], k: usize) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v[k - 1]
}

/// `sup |F_a - F_b|` evaluated at every sample point, O((n+m)^2).
pub fn brute_ks(a: &[f64], b: &[f64]) -> f64 {
    let cdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
    a.iter()
        .chain(b)
        .map(|&x| (cdf(a, x) - cdf(b, x)).abs())
        .fold(0.0, f64::max)
}

/// Per-feature mean by direct enumeration; argmax with smallest-id ties.
pub fn brute_mono_feature(ms: &[f64], labels: &[usize]) -> usize {
    let nf = labels.iter().max().unwrap() + 1;
    let mut best = None;
    for f in 0..nf {
        let sel: Vec<f64> = ms
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == f)
            .map(|(&m, _)| m)
            .collect();
        if sel.is_empty() {
            continue;
        }
        let mean = sel.iter().sum::<f64>() / sel.len() as f64;
        match best {
            Some((_, b)) if mean <= b => {}
            _ => best = Some((f, mean)),
        }
    }
    best.unwrap().0
}

/// FKR by the double sum over inputs `i` and neurons `j` with `tau_k` the
/// k-th largest of all entries; `ms[j][i]`.
pub fn brute_fkr(ms: &[Vec<f64>], labels: &[usize], mono: &[usize], rate: f64) -> (usize, u64, u64) {
    let all: Vec<f64> = ms.iter().flatten().copied().collect();
    let k = ((rate * all.len() as f64).round() as usize).max(1);
    let tau = sort_kth(&all, k);
    let (mut num, mut den) = (0u64, 0u64);
    for i in 0..labels.len() {
        for j in 0..ms.len() {
            if ms[j][i] >= tau {
                den += 1;
                if labels[i] != mono[j] {
                    num += 1;
                }
            }
        }
    }
    (k, num, den)
}

/// Best single-threshold F1 by trying every midpoint in both directions.
pub fn brute_probe(values: &[f64], labels: &[usize], feature: usize) -> f64 {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.dedup();
    let mut cuts = vec![f64::NEG_INFINITY];
    cuts.extend(sorted.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    let f1 = |pred: &dyn Fn(f64) -> bool| {
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        for (&v, &l) in values.iter().zip(labels) {
            match (pred(v), l == feature) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
        if 2 * tp + fp + fn_ == 0 {
            0.0
        } else {
            2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
        }
    };
    let mut best: f64 = 0.0;
    for &c in &cuts {
        best = best.max(f1(&|v| v > c));
        best = best.max(f1(&|v| v < c));
    }
    best
}
