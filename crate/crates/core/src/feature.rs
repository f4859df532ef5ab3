//! Feature-conditioned views of monosemanticity scores.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Labelled inputs; `labels[i]` is the feature id of `inputs[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDataset {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub feature_names: Vec<String>,
}

impl FeatureDataset {
    pub fn new(inputs: Vec<Vec<f64>>, labels: Vec<usize>, feature_names: Vec<String>) -> Result<Self> {
        if feature_names.is_empty() {
            return Err(invalid("a dataset needs at least one feature"));
        }
        if inputs.len() != labels.len() {
            return Err(invalid(format!(
                "{} inputs but {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= feature_names.len()) {
            return Err(Error::Validation(format!(
                "label {bad} out of range for {} features",
                feature_names.len()
            )));
        }
        Ok(FeatureDataset {
            inputs,
            labels,
            feature_names,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Indices of the inputs labelled `feature`.
    pub fn partition(&self, feature: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == feature).collect()
    }

    pub fn feature_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_features()];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }
}

/// Mean score inside and outside one feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeaturePartitionReport {
    pub feature: usize,
    pub phi_l: f64,
    pub phi_l_minus: f64,
    pub count_l: usize,
    pub count_l_minus: usize,
}

pub fn partition_means(ms: &[f64], labels: &[usize], feature: usize) -> Result<FeaturePartitionReport> {
    if ms.len() != labels.len() {
        return Err(invalid(format!("{} scores but {} labels", ms.len(), labels.len())));
    }
    let (mut sin, mut nin, mut sout, mut nout) = (0.0, 0usize, 0.0, 0usize);
    for (&m, &l) in ms.iter().zip(labels) {
        if l == feature {
            sin += m;
            nin += 1;
        } else {
            sout += m;
            nout += 1;
        }
    }
    if nin == 0 {
        return Err(Error::MissingFeature(feature));
    }
    if nout == 0 {
        return Err(Error::EmptyComplement(feature));
    }
    Ok(FeaturePartitionReport {
        feature,
        phi_l: sin / nin as f64,
        phi_l_minus: sout / nout as f64,
        count_l: nin,
        count_l_minus: nout,
    })
}

/// Per-feature mean score; `None` for features without samples.
pub fn feature_means(ms: &[f64], labels: &[usize]) -> Vec<Option<f64>> {
    let n_features = labels.iter().max().map_or(0, |&m| m + 1);
    let mut sum = vec![0.0; n_features];
    let mut cnt = vec![0usize; n_features];
    for (&m, &l) in ms.iter().zip(labels) {
        sum[l] += m;
        cnt[l] += 1;
    }
    sum.into_iter()
        .zip(cnt)
        .map(|(s, c)| (c > 0).then(|| s / c as f64))
        .collect()
}

/// The feature with the highest mean score. Ties go to the smallest id.
pub fn relatively_mono_feature(ms: &[f64], labels: &[usize]) -> Result<(usize, f64)> {
    if ms.is_empty() {
        return Err(invalid("no samples"));
    }
    if ms.len() != labels.len() {
        return Err(invalid(format!("{} scores but {} labels", ms.len(), labels.len())));
    }
    let mut best: Option<(usize, f64)> = None;
    for (f, m) in feature_means(ms, labels).into_iter().enumerate() {
        let Some(m) = m else { continue };
        match best {
            Some((_, b)) if m <= b => {}
            _ => best = Some((f, m)),
        }
    }
    Ok(best.expect("nonempty input has at least one feature"))
}

/// Two-sample Kolmogorov-Smirnov statistic `sup_x |F_a(x) - F_b(x)|`,
/// computed exactly over the empirical CDFs.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("K-S statistic needs two nonempty samples"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    Ok(ks_sorted(&a, &b))
}

/// As [`ks_statistic`] for inputs already sorted ascending.
pub fn ks_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    // Once one sample is exhausted its CDF is 1 and the other only grows
    // towards 1, so the remaining gap is already covered.
    d
}

/// Scores of one scale: per-neuron MS columns over a shared label vector.
#[derive(Debug, Clone)]
pub struct ScaleScores {
    pub name: String,
    pub labels: Vec<usize>,
    pub neurons: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronKs {
    pub neuron: usize,
    pub mono_feature: usize,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleKs {
    pub name: String,
    pub neurons: Vec<NeuronKs>,
    pub mean_d: f64,
}

/// K-S statistic between a neuron's MS on its relatively monosemantic
/// feature and its MS over all inputs.
pub fn neuron_ks(ms: &[f64], labels: &[usize]) -> Result<(usize, f64)> {
    let (f, _) = relatively_mono_feature(ms, labels)?;
    let cond: Vec<f64> = ms
        .iter()
        .zip(labels)
        .filter_map(|(&m, &l)| (l == f).then_some(m))
        .collect();
    Ok((f, ks_statistic(&cond, ms)?))
}

pub fn scale_ks_scan(scales: &[ScaleScores]) -> Result<Vec<ScaleKs>> {
    scales
        .iter()
        .map(|s| {
            let n_features = s.labels.iter().max().map_or(0, |&m| m + 1);
            let mut per_feature = vec![0usize; n_features];
            for &l in &s.labels {
                per_feature[l] += 1;
            }
            let present: Vec<usize> = per_feature.iter().copied().filter(|&c| c > 0).collect();
            if present.len() < 2 || present.iter().any(|&c| c < 2) {
                return Err(invalid(format!(
                    "scale {}: need at least 2 features with at least 2 samples each",
                    s.name
                )));
            }
            let neurons = crate::analysis::map_neurons(&s.neurons, |j, col| {
                if col.len() != s.labels.len() {
                    return Err(invalid(format!("scale {}: neuron {j} length mismatch", s.name)));
                }
                let (mono_feature, d) = neuron_ks(col, &s.labels)?;
                Ok(NeuronKs {
                    neuron: j,
                    mono_feature,
                    d,
                })
            })?;
            let mean_d = if neurons.is_empty() {
                0.0
            } else {
                neurons.iter().map(|n| n.d).sum::<f64>() / neurons.len() as f64
            };
            Ok(ScaleKs {
                name: s.name.clone(),
                neurons,
                mean_d,
            })
        })
        .collect()
}

/// Best F1 of a single-threshold classifier for `label == feature`.
///
/// Thresholds sweep every midpoint between consecutive distinct values in
/// both directions (feature above / feature below), plus the predict-all
/// classifier.
pub fn mean_diff_probe(values: &[f64], labels: &[usize], feature: usize) -> Result<f64> {
    if values.len() != labels.len() {
        return Err(invalid(format!("{} values but {} labels", values.len(), labels.len())));
    }
    if values.len() < 2 {
        return Err(invalid("probe needs at least 2 samples"));
    }
    let pos_total = labels.iter().filter(|&&l| l == feature).count();
    if pos_total == 0 {
        return Err(Error::MissingFeature(feature));
    }
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_unstable_by(|&a, &b| values[a].total_cmp(&values[b]));

    let f1 = |tp: usize, fp: usize, fneg: usize| -> f64 {
        let denom = 2 * tp + fp + fneg;
        if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    };
    // predict everything positive
    let mut best = f1(pos_total, n - pos_total, 0);
    // below_pos / below_n: positives and total strictly below the cut
    let mut below_pos = 0usize;
    let mut i = 0usize;
    while i < n {
        let v = values[idx[i]];
        while i < n && values[idx[i]] == v {
            below_pos += (labels[idx[i]] == feature) as usize;
            i += 1;
        }
        if i == n {
            break;
        }
        let below_n = i;
        let above_pos = pos_total - below_pos;
        let above_n = n - below_n;
        // predict positive above the cut
        best = best.max(f1(above_pos, above_n - above_pos, below_pos));
        // predict positive below the cut
        best = best.max(f1(below_pos, below_n - below_pos, above_pos));
    }
    Ok(best)
}
