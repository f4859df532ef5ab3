//! Dataset-level (retrospective) analysis over a whole activation matrix.

use crate::error::{invalid, Result};
use crate::feature;
use crate::stats::retrospective_ms_into;

/// Maps `f` over `0..n`, in parallel when the `parallel` feature is on.
/// Output order is index order either way.
pub fn par_map<R, F>(n: usize, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(usize) -> Result<R> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

pub(crate) fn map_neurons<R, F>(cols: &[Vec<f64>], f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(usize, &[f64]) -> Result<R> + Sync + Send,
{
    par_map(cols.len(), |j| f(j, &cols[j]))
}

/// Values stored neuron-major: column `j` holds neuron `j` over all inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronMajor {
    pub n_inputs: usize,
    pub n_neurons: usize,
    pub data: Vec<f64>,
}

impl NeuronMajor {
    pub fn zeros(n_inputs: usize, n_neurons: usize) -> Self {
        NeuronMajor {
            n_inputs,
            n_neurons,
            data: vec![0.0; n_inputs * n_neurons],
        }
    }

    /// Transposes input-major rows.
    pub fn from_rows<'a, I, T>(n_neurons: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [T]>,
        T: Copy + Into<f64> + 'a,
    {
        let rows: Vec<&[T]> = rows.into_iter().collect();
        let n = rows.len();
        let mut m = NeuronMajor::zeros(n, n_neurons);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n_neurons {
                return Err(invalid(format!("row {i} has {} values, expected {n_neurons}", r.len())));
            }
            for (j, &v) in r.iter().enumerate() {
                m.data[j * n + i] = v.into();
            }
        }
        Ok(m)
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.n_inputs..(j + 1) * self.n_inputs]
    }

    pub fn get(&self, input: usize, neuron: usize) -> f64 {
        self.data[neuron * self.n_inputs + input]
    }
}

/// Retrospective scores for every (input, neuron) entry. Neurons whose
/// variance is degenerate are flagged invalid as a whole column.
#[derive(Debug, Clone, PartialEq)]
pub struct MsMatrix {
    pub scores: NeuronMajor,
    pub valid: Vec<bool>,
}

impl MsMatrix {
    pub fn n_inputs(&self) -> usize {
        self.scores.n_inputs
    }

    pub fn n_neurons(&self) -> usize {
        self.scores.n_neurons
    }

    pub fn column(&self, j: usize) -> &[f64] {
        self.scores.column(j)
    }

    pub fn valid_entries(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count() * self.n_inputs()
    }

    /// Every valid score, neuron by neuron.
    pub fn valid_scores(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_neurons())
            .filter(|&j| self.valid[j])
            .flat_map(move |j| self.column(j).iter().copied())
    }
}

pub fn ms_matrix(act: &NeuronMajor) -> Result<MsMatrix> {
    let n = act.n_inputs;
    let cols = par_map(act.n_neurons, |j| {
        let mut out = vec![0.0; n];
        let ok = retrospective_ms_into(act.column(j), &mut out).is_ok();
        Ok((out, ok))
    })?;
    let mut scores = NeuronMajor::zeros(n, act.n_neurons);
    let mut valid = Vec::with_capacity(act.n_neurons);
    for (j, (c, ok)) in cols.into_iter().enumerate() {
        scores.data[j * n..(j + 1) * n].copy_from_slice(&c);
        valid.push(ok);
    }
    Ok(MsMatrix { scores, valid })
}

/// Relatively monosemantic feature of each valid neuron.
pub fn mono_features(ms: &MsMatrix, labels: &[usize]) -> Result<Vec<Option<usize>>> {
    if labels.len() != ms.n_inputs() {
        return Err(invalid(format!(
            "{} labels for {} inputs",
            labels.len(),
            ms.n_inputs()
        )));
    }
    par_map(ms.n_neurons(), |j| {
        if !ms.valid[j] {
            return Ok(None);
        }
        feature::relatively_mono_feature(ms.column(j), labels).map(|(f, _)| Some(f))
    })
}
