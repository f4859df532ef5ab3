mod common;

use common::{brute_fkr, brute_mono_feature, sort_kth};
use l2e_core::analysis::{mono_features, ms_matrix, MsMatrix, NeuronMajor};
use l2e_core::gen::{generate, GenDumpSpec};
use l2e_core::selector::{bench_selection, exact_topk_mask, fkr, fkr_curve, kth_largest, BenchConfig};
use l2e_core::{Error, MovingThreshold, MsVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

fn scores() -> impl Strategy<Value = Vec<f64>> {
    prop_oneof![
        prop::collection::vec(0.0f64..100.0, 1..500),
        prop::collection::vec((0u8..8).prop_map(f64::from), 1..500),
    ]
}

proptest! {
    #[test]
    fn kth_equals_sort_oracle(v in scores(), r in 0.0f64..1.0) {
        let k = 1 + (r * v.len() as f64) as usize % v.len();
        prop_assert_eq!(kth_largest(&v, k).unwrap(), sort_kth(&v, k));
    }

    #[test]
    fn topk_mask_population(v in scores(), r in 0.0f64..1.0, invalid in prop::collection::vec(any::<bool>(), 500)) {
        let valid: Vec<bool> = v.iter().zip(&invalid).map(|(_, &b)| !b).collect();
        let ms = MsVector { values: v.clone(), valid: valid.clone() };
        let good: Vec<f64> = v.iter().zip(&valid).filter(|(_, &ok)| ok).map(|(&x, _)| x).collect();
        prop_assume!(!good.is_empty());
        let k = 1 + (r * good.len() as f64) as usize % good.len();
        let mask = exact_topk_mask(&ms, k).unwrap();
        let tau = sort_kth(&good, k);
        let pop = mask.iter().filter(|&&m| m).count();
        prop_assert!(pop >= k);
        for i in 0..v.len() {
            prop_assert_eq!(mask[i], valid[i] && v[i] >= tau);
        }
        if good.iter().filter(|&&x| x == tau).count() == 1 {
            prop_assert_eq!(pop, k);
        }
    }

    #[test]
    fn every_select_moves_tau_by_offset(batches in prop::collection::vec(prop::collection::vec(0.0f64..10.0, 50), 3..30)) {
        let mut thr = MovingThreshold::new(50, 5, 2).unwrap();
        let mut replay = 0.0;
        for (t, b) in batches.iter().enumerate() {
            let ms = MsVector::from_values(b.clone());
            if t < 2 {
                prop_assert!(thr.observe(&ms).unwrap().is_none());
                if t == 1 {
                    let expect = (sort_kth(&batches[0], 5) + sort_kth(&batches[1], 5)) / 2.0;
                    prop_assert_eq!(thr.tau_star(), expect);
                    replay = expect;
                }
                continue;
            }
            let before = thr.tau_star();
            let mask = thr.select(&ms).unwrap();
            let k_star = mask.iter().filter(|&&m| m).count();
            for (m, v) in mask.iter().zip(b) {
                prop_assert_eq!(*m, *v >= before);
            }
            replay += (k_star as f64 - 5.0) / 50.0;
            prop_assert_eq!(thr.tau_star(), before + (k_star as f64 - 5.0) / 50.0);
            prop_assert_eq!(thr.tau_star(), replay);
            prop_assert_eq!(thr.last_k_star(), Some(k_star));
        }
    }
}

#[test]
fn select_examples() {
    let mut thr = MovingThreshold::new(100, 2, 1).unwrap();
    let mut ms = MsVector::from_values(vec![0.0; 100]);
    ms.values[..5].copy_from_slice(&[3.0, 2.0, 1.0, 1.0, 1.0]);
    assert!(matches!(thr.select(&ms), Err(Error::WarmupIncomplete { remaining: 1 })));
    thr.warmup_observe(&ms).unwrap();
    assert_eq!(thr.tau_star(), 2.0);
    // two entries at or above 2: no change
    thr.select(&ms).unwrap();
    assert_eq!(thr.tau_star(), 2.0);
    // nothing above: drops by k/N
    let low = MsVector::from_values(vec![0.5; 100]);
    assert_eq!(thr.select(&low).unwrap().iter().filter(|&&m| m).count(), 0);
    assert!((thr.tau_star() - 1.98).abs() < 1e-15);
}

#[test]
fn warmup_rejects_degenerate_batches() {
    let mut thr = MovingThreshold::new(4, 2, 3).unwrap();
    let ms = MsVector {
        values: vec![1.0; 4],
        valid: vec![false, false, false, true],
    };
    assert!(matches!(
        thr.warmup_observe(&ms),
        Err(Error::InsufficientValidNeurons { valid: 1, needed: 2 })
    ));
    assert!(MovingThreshold::new(4, 5, 1).is_err());
    assert!(MovingThreshold::new(4, 1, 0).is_err());
}

#[test]
fn invalid_entries_are_never_selected() {
    let mut thr = MovingThreshold::new(3, 1, 1).unwrap();
    thr.warmup_observe(&MsVector::from_values(vec![1.0, 0.0, 0.0])).unwrap();
    let ms = MsVector {
        values: vec![5.0, 5.0, 0.0],
        valid: vec![false, true, true],
    };
    assert_eq!(thr.select(&ms).unwrap(), vec![false, true, false]);
}

#[test]
fn count_tracks_target_on_stationary_stream() {
    let (n, k) = (5000, 100);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut thr = MovingThreshold::new(n, k, 20).unwrap();
    let mut batch = || MsVector::from_values((0..n).map(|_| Exp1.sample(&mut rng)).collect());
    for _ in 0..20 {
        thr.warmup_observe(&batch()).unwrap();
    }
    let mut counts = Vec::new();
    for _ in 0..300 {
        counts.push(thr.select(&batch()).unwrap().iter().filter(|&&m| m).count());
    }
    let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
    assert!((mean - k as f64).abs() <= 0.25 * k as f64, "{mean}");
}

fn matrix(cols: &[Vec<f64>]) -> MsMatrix {
    let n = cols[0].len();
    let mut m = NeuronMajor::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.data[j * n..(j + 1) * n].copy_from_slice(c);
    }
    MsMatrix {
        scores: m,
        valid: vec![true; cols.len()],
    }
}

#[test]
fn fkr_at_global_maximum_counts_argmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cols: Vec<Vec<f64>> = (0..8).map(|_| (0..50).map(|_| rng.random::<f64>()).collect()).collect();
    let labels: Vec<usize> = (0..50).map(|i| i % 4).collect();
    let ms = matrix(&cols);
    let mono = mono_features(&ms, &labels).unwrap();
    // k = round(0.001 * 400) clamps to 1: tau is the global maximum
    let r = fkr(&ms, &labels, &mono, 0.001).unwrap();
    assert_eq!(r.k, 1);
    assert_eq!(r.inhibitions, 1);
    let max = cols.iter().flatten().copied().fold(f64::MIN, f64::max);
    assert_eq!(r.tau_k, max);
}

#[test]
fn fkr_worked_example() {
    // three entries reach the threshold, one from a foreign feature
    let cols = vec![vec![9.0, 0.0, 8.0, 0.0], vec![0.0, 7.0, 0.0, 0.5]];
    let labels = vec![0, 1, 0, 0];
    let ms = matrix(&cols);
    let mono = vec![Some(0), Some(0)];
    let r = fkr(&ms, &labels, &mono, 3.0 / 8.0).unwrap();
    assert_eq!((r.k, r.inhibitions, r.false_kills), (3, 3, 1));
    assert_eq!(r.fkr, 1.0 / 3.0);

    let mono = mono_features(&ms, &labels).unwrap();
    assert_eq!(mono, vec![Some(0), Some(1)]);
    assert_eq!(fkr(&ms, &labels, &mono, 3.0 / 8.0).unwrap().fkr, 0.0);
}

#[test]
fn curve_properties_on_generated_dump() {
    let spec = GenDumpSpec {
        n_records: 2000,
        mono: 3,
        background: 13,
        seed: 4,
        ..Default::default()
    };
    let (labels, rows, _) = generate(&spec).unwrap();
    let act = NeuronMajor::from_rows(16, rows.chunks_exact(16)).unwrap();
    let ms = ms_matrix(&act).unwrap();
    let mono = mono_features(&ms, &labels).unwrap();
    let rates = [0.001, 0.01, 0.01, 0.1, 0.5, 1.0];
    let curve = fkr_curve(&ms, &labels, &mono, &rates).unwrap();
    assert_eq!(curve[1], curve[2]);
    assert!(curve.windows(2).all(|w| w[1].tau_k <= w[0].tau_k));
    for (r, c) in rates.iter().zip(&curve) {
        assert_eq!(*c, fkr(&ms, &labels, &mono, *r).unwrap());
    }
    // rate 1: every entry selected, FKR is the share of foreign inputs
    let full = curve.last().unwrap();
    assert_eq!(full.inhibitions, (16 * 2000) as u64);
    let foreign: u64 = mono
        .iter()
        .map(|m| labels.iter().filter(|&&l| Some(l) != *m).count() as u64)
        .sum();
    assert_eq!(full.false_kills, foreign);
    assert!(fkr_curve(&ms, &labels, &mono, &[0.1, 0.01]).is_err());
    assert!(fkr_curve(&ms, &labels, &mono, &[0.0]).is_err());
}

#[test]
fn background_only_dump_matches_counting_oracle() {
    let spec = GenDumpSpec {
        n_records: 3000,
        mono: 0,
        background: 12,
        seed: 8,
        ..Default::default()
    };
    let (labels, rows, _) = generate(&spec).unwrap();
    let act = NeuronMajor::from_rows(12, rows.chunks_exact(12)).unwrap();
    let ms = ms_matrix(&act).unwrap();
    let cols: Vec<Vec<f64>> = (0..12).map(|j| ms.column(j).to_vec()).collect();
    let mono_b: Vec<usize> = cols.iter().map(|c| brute_mono_feature(c, &labels)).collect();
    let mono = mono_features(&ms, &labels).unwrap();
    for rate in [0.005, 0.02, 0.2, 1.0] {
        let r = fkr(&ms, &labels, &mono, rate).unwrap();
        let (k, num, den) = brute_fkr(&cols, &labels, &mono_b, rate);
        assert_eq!((r.k, r.false_kills, r.inhibitions), (k, num, den));
    }
    // with nine balanced features roughly 8/9 of selections are foreign
    let r = fkr(&ms, &labels, &mono, 1.0).unwrap();
    assert!((r.fkr - 8.0 / 9.0).abs() < 0.02, "{}", r.fkr);
}

#[test]
fn degenerate_neurons_are_skipped() {
    let mut cols = [vec![1.0, 2.0, 3.0, 4.0], vec![5.0; 4]];
    cols[0].reverse();
    let act = {
        let mut m = NeuronMajor::zeros(4, 2);
        m.data[..4].copy_from_slice(&cols[0]);
        m.data[4..].copy_from_slice(&cols[1]);
        m
    };
    let ms = ms_matrix(&act).unwrap();
    assert_eq!(ms.valid, vec![true, false]);
    let labels = vec![0, 1, 0, 1];
    let mono = mono_features(&ms, &labels).unwrap();
    assert_eq!(mono[1], None);
    let r = fkr(&ms, &labels, &mono, 1.0).unwrap();
    assert_eq!(r.inhibitions, 4);
}

#[test]
fn bench_reports_every_strategy() {
    let rows = bench_selection(&BenchConfig {
        n_neurons: 20_000,
        rate: 0.02,
        batches: 5,
        warmup_batches: 3,
        seed: 1,
    })
    .unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r.strategy.as_str()).collect();
    assert_eq!(names, ["moving-threshold", "sort", "heap"]);
    for r in &rows {
        assert!(r.mean_ms >= 0.0 && r.mean_k_star > 0.0);
    }
    // exact strategies select exactly k on continuous scores
    assert_eq!(rows[1].mean_k_star, 400.0);
    assert_eq!(rows[2].mean_k_star, 400.0);
}
