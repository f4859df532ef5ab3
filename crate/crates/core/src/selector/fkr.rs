use serde::{Deserialize, Serialize};

use crate::analysis::{par_map, MsMatrix};
use crate::error::{invalid, Error, Result};

use super::threshold::kth_largest_in_place;

/// Outcome of inhibiting the top `rate` fraction of (input, neuron) entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FkrReport {
    pub rate: f64,
    pub k: usize,
    pub tau_k: f64,
    pub inhibitions: u64,
    pub false_kills: u64,
    pub fkr: f64,
}

/// `k = max(1, round(rate * entries))`, capped at `entries`.
pub fn rate_to_k(rate: f64, entries: usize) -> Result<usize> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(invalid(format!("rate {rate} outside (0, 1]")));
    }
    if entries == 0 {
        return Err(invalid("no valid entries to select from"));
    }
    Ok(((rate * entries as f64).round() as usize).clamp(1, entries))
}

fn check_shapes(ms: &MsMatrix, labels: &[usize], mono: &[Option<usize>]) -> Result<()> {
    if labels.len() != ms.n_inputs() {
        return Err(invalid(format!("{} labels for {} inputs", labels.len(), ms.n_inputs())));
    }
    if mono.len() != ms.n_neurons() {
        return Err(invalid(format!(
            "{} monosemantic features for {} neurons",
            mono.len(),
            ms.n_neurons()
        )));
    }
    if let Some(j) = (0..ms.n_neurons()).find(|&j| ms.valid[j] && mono[j].is_none()) {
        return Err(invalid(format!("neuron {j} has no relatively monosemantic feature")));
    }
    Ok(())
}

/// Counts (inhibitions, false kills) at threshold `tau` over valid neurons.
fn count_at(ms: &MsMatrix, labels: &[usize], mono: &[Option<usize>], tau: f64) -> Result<(u64, u64)> {
    let per_neuron = par_map(ms.n_neurons(), |j| {
        let Some(f) = mono[j].filter(|_| ms.valid[j]) else {
            return Ok((0u64, 0u64));
        };
        let (mut hit, mut fk) = (0u64, 0u64);
        for (&s, &l) in ms.column(j).iter().zip(labels) {
            if s >= tau {
                hit += 1;
                fk += (l != f) as u64;
            }
        }
        Ok((hit, fk))
    })?;
    Ok(per_neuron
        .into_iter()
        .fold((0, 0), |(a, b), (h, f)| (a + h, b + f)))
}

fn report(rate: f64, k: usize, tau_k: f64, (inhibitions, false_kills): (u64, u64)) -> Result<FkrReport> {
    if inhibitions == 0 {
        return Err(Error::UndefinedFkr);
    }
    Ok(FkrReport {
        rate,
        k,
        tau_k,
        inhibitions,
        false_kills,
        fkr: false_kills as f64 / inhibitions as f64,
    })
}

/// False Killing Rate with one global threshold `tau_k`, the k-th largest
/// score over all valid (input, neuron) entries.
pub fn fkr(ms: &MsMatrix, labels: &[usize], mono: &[Option<usize>], rate: f64) -> Result<FkrReport> {
    check_shapes(ms, labels, mono)?;
    let mut all: Vec<f64> = ms.valid_scores().collect();
    let k = rate_to_k(rate, all.len())?;
    let tau = kth_largest_in_place(&mut all, k);
    report(rate, k, tau, count_at(ms, labels, mono, tau)?)
}

/// [`fkr`] at several rates, sorting the scores once.
pub fn fkr_curve(
    ms: &MsMatrix,
    labels: &[usize],
    mono: &[Option<usize>],
    rates: &[f64],
) -> Result<Vec<FkrReport>> {
    check_shapes(ms, labels, mono)?;
    if rates.is_empty() {
        return Err(invalid("no rates given"));
    }
    if rates.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("rates must be sorted ascending"));
    }
    let mut all: Vec<f64> = ms.valid_scores().collect();
    let ks = rates
        .iter()
        .map(|&r| rate_to_k(r, all.len()))
        .collect::<Result<Vec<_>>>()?;
    all.sort_unstable_by(|a, b| b.total_cmp(a));
    rates
        .iter()
        .zip(ks)
        .map(|(&r, k)| {
            let tau = all[k - 1];
            report(r, k, tau, count_at(ms, labels, mono, tau)?)
        })
        .collect()
}
