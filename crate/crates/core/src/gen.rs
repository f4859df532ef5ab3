//! Synthetic activation dumps with known monosemantic neurons.
//!
//! A monosemantic neuron is bound to one feature and its output is shifted
//! by `shift` noise standard deviations on inputs of that feature. A
//! background neuron ignores labels: Gaussian noise plus rare spikes of
//! `spike_min..spike_max` standard deviations.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::io::dump::{DumpHeader, DumpWriter};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenDumpSpec {
    pub n_features: usize,
    pub n_records: usize,
    pub mono: usize,
    pub background: usize,
    /// Mean shift of a monosemantic neuron on its feature, in units of `noise`.
    pub shift: f64,
    pub noise: f64,
    pub spike_prob: f64,
    pub spike_min: f64,
    pub spike_max: f64,
    /// Scatter monosemantic neurons across the layer instead of placing
    /// them first.
    pub shuffle_neurons: bool,
    pub seed: u64,
}

impl Default for GenDumpSpec {
    fn default() -> Self {
        GenDumpSpec {
            n_features: 9,
            n_records: 10_000,
            mono: 6,
            background: 58,
            shift: 5.0,
            noise: 1.0,
            spike_prob: 0.01,
            spike_min: 5.0,
            spike_max: 10.0,
            shuffle_neurons: true,
            seed: 0,
        }
    }
}

impl GenDumpSpec {
    pub fn n_neurons(&self) -> usize {
        self.mono + self.background
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_neurons() == 0 {
            return Err(invalid("need at least one neuron"));
        }
        if self.n_features < 2 {
            return Err(invalid("need at least two features"));
        }
        if !(self.noise > 0.0) || !self.shift.is_finite() {
            return Err(invalid("noise must be > 0 and shift finite"));
        }
        if !(0.0..=1.0).contains(&self.spike_prob) || !(self.spike_min <= self.spike_max) {
            return Err(invalid("spike_prob must lie in [0, 1] and spike_min <= spike_max"));
        }
        Ok(())
    }

    pub fn header(&self) -> Result<DumpHeader> {
        DumpHeader::new(
            self.n_neurons(),
            (0..self.n_features).map(|f| format!("feature_{f}")).collect(),
        )
    }
}

/// Record iterator; [`bindings`](Self::bindings) is the ground truth.
pub struct DumpGenerator {
    spec: GenDumpSpec,
    rng: ChaCha8Rng,
    bindings: Vec<Option<usize>>,
    remaining: usize,
}

impl DumpGenerator {
    pub fn new(spec: &GenDumpSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut bindings: Vec<Option<usize>> = (0..spec.mono)
            .map(|m| Some(m % spec.n_features))
            .chain(std::iter::repeat_n(None, spec.background))
            .collect();
        if spec.shuffle_neurons {
            bindings.shuffle(&mut rng);
        }
        Ok(DumpGenerator {
            spec: spec.clone(),
            rng,
            bindings,
            remaining: spec.n_records,
        })
    }

    /// Bound feature per neuron; `None` for background neurons.
    pub fn bindings(&self) -> &[Option<usize>] {
        &self.bindings
    }

    pub fn next_into(&mut self, values: &mut Vec<f32>) -> Option<usize> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let s = &self.spec;
        let label = self.rng.random_range(0..s.n_features);
        values.clear();
        for b in &self.bindings {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            let mut v = z * s.noise;
            match *b {
                Some(f) if f == label => v += s.shift * s.noise,
                Some(_) => {}
                None => {
                    if s.spike_prob > 0.0 && self.rng.random::<f64>() < s.spike_prob {
                        v += self.rng.random_range(s.spike_min..=s.spike_max) * s.noise;
                    }
                }
            }
            values.push(v as f32);
        }
        Some(label)
    }
}

impl Iterator for DumpGenerator {
    type Item = (usize, Vec<f32>);

    fn next(&mut self) -> Option<Self::Item> {
        let mut v = Vec::with_capacity(self.bindings.len());
        self.next_into(&mut v).map(|l| (l, v))
    }
}

/// Streams a generated dump into `w`; returns the binding table.
pub fn gen_dump<W: Write>(spec: &GenDumpSpec, w: W) -> Result<(W, Vec<Option<usize>>)> {
    let mut g = DumpGenerator::new(spec)?;
    let mut out = DumpWriter::new(w, spec.header()?)?;
    let mut v = Vec::with_capacity(spec.n_neurons());
    while let Some(label) = g.next_into(&mut v) {
        out.write_record(label, &v)?;
    }
    Ok((out.finish()?, g.bindings.clone()))
}

/// Labels, input-major rows and per-neuron bindings.
pub type Generated = (Vec<usize>, Vec<f32>, Vec<Option<usize>>);

/// Generates the dump directly into memory.
pub fn generate(spec: &GenDumpSpec) -> Result<Generated> {
    let mut g = DumpGenerator::new(spec)?;
    let mut labels = Vec::with_capacity(spec.n_records);
    let mut rows = Vec::with_capacity(spec.n_records * spec.n_neurons());
    let mut v = Vec::new();
    while let Some(l) = g.next_into(&mut v) {
        labels.push(l);
        rows.extend_from_slice(&v);
    }
    Ok((labels, rows, g.bindings.clone()))
}
