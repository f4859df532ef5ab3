use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::inhibition::{ms_loss_grad, ms_term};

/// Dense row-major matrix; rows are samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(invalid(format!("row {i} has {} columns, expected {cols}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative given the pre-activation and its output.
    fn derivative(self, pre: f64, post: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - post * post,
            Activation::Identity => 1.0,
        }
    }
}

/// `outputs x inputs` weight matrix plus bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// He-normal weights, zero bias.
    pub fn random<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let std = (2.0 / inputs as f64).sqrt();
        let weights = (0..inputs * outputs)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                z * std
            })
            .collect();
        Layer {
            inputs,
            outputs,
            weights,
            bias: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows, self.outputs);
        for b in 0..x.rows {
            let xr = x.row(b);
            let orow = out.row_mut(b);
            for (o, slot) in orow.iter_mut().enumerate() {
                let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                let mut acc = self.bias[o];
                for (wi, xi) in w.iter().zip(xr) {
                    acc += wi * xi;
                }
                *slot = acc;
            }
        }
        out
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    fn backward(&self, x: &Matrix, dpre: &Matrix, grad: &mut Layer) -> Matrix {
        let mut dx = Matrix::zeros(x.rows, self.inputs);
        for b in 0..x.rows {
            let xr = x.row(b);
            let dr = dpre.row(b);
            for (o, &d) in dr.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                grad.bias[o] += d;
                let gw = &mut grad.weights[o * self.inputs..(o + 1) * self.inputs];
                for (g, xi) in gw.iter_mut().zip(xr) {
                    *g += d * xi;
                }
                let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                for (dxi, wi) in dx.row_mut(b).iter_mut().zip(w) {
                    *dxi += d * wi;
                }
            }
        }
        dx
    }
}

/// Per-layer pre- and post-activation values and the output logits.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    pub pre: Vec<Matrix>,
    pub post: Vec<Matrix>,
    pub logits: Matrix,
}

/// Gradients with the same layout as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub hidden: Vec<Layer>,
    pub output: Layer,
}

impl Gradients {
    /// Hidden layers first (weights then bias), output layer last.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for l in self.hidden.iter().chain(std::iter::once(&self.output)) {
            v.extend_from_slice(&l.weights);
            v.extend_from_slice(&l.bias);
        }
        v
    }
}

/// One force-selected (sample, neuron) entry of a hidden layer together
/// with the detached running mean it is pulled towards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyEntry {
    pub layer: usize,
    pub sample: usize,
    pub neuron: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyNet {
    pub hidden: Vec<Layer>,
    pub output: Layer,
    pub activation: Activation,
}

/// Mean softmax cross-entropy and its gradient w.r.t. the logits.
pub fn cross_entropy(logits: &Matrix, labels: &[usize]) -> (f64, Matrix) {
    let n = logits.rows as f64;
    let mut grad = Matrix::zeros(logits.rows, logits.cols);
    let mut loss = 0.0;
    for (b, &y) in labels.iter().enumerate() {
        let row = logits.row(b);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let lse = max + sum.ln();
        loss += lse - row[y];
        let g = grad.row_mut(b);
        for (c, v) in row.iter().enumerate() {
            g[c] = (v - lse).exp() / n;
        }
        g[y] -= 1.0 / n;
    }
    (loss / n, grad)
}

impl ToyNet {
    pub fn random<R: Rng>(
        input_dim: usize,
        widths: &[usize],
        n_classes: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        Self::check_dims(input_dim, widths, n_classes)?;
        let mut hidden = Vec::with_capacity(widths.len());
        let mut prev = input_dim;
        for &w in widths {
            hidden.push(Layer::random(prev, w, rng));
            prev = w;
        }
        Ok(ToyNet {
            hidden,
            output: Layer::random(prev, n_classes, rng),
            activation,
        })
    }

    pub fn zeros(input_dim: usize, widths: &[usize], n_classes: usize, activation: Activation) -> Result<Self> {
        Self::check_dims(input_dim, widths, n_classes)?;
        let mut hidden = Vec::with_capacity(widths.len());
        let mut prev = input_dim;
        for &w in widths {
            hidden.push(Layer::zeros(prev, w));
            prev = w;
        }
        Ok(ToyNet {
            hidden,
            output: Layer::zeros(prev, n_classes),
            activation,
        })
    }

    fn check_dims(input_dim: usize, widths: &[usize], n_classes: usize) -> Result<()> {
        if input_dim == 0 || n_classes == 0 || widths.contains(&0) {
            return Err(invalid("network dimensions must be positive"));
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.hidden.len()
    }

    pub fn input_dim(&self) -> usize {
        self.hidden.first().unwrap_or(&self.output).inputs
    }

    pub fn widths(&self) -> Vec<usize> {
        self.hidden.iter().map(|l| l.outputs).collect()
    }

    pub fn n_params(&self) -> usize {
        self.layers().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn layers(&self) -> impl Iterator<Item = &Layer> {
        self.hidden.iter().chain(std::iter::once(&self.output))
    }

    /// Mutable reference to the `idx`-th parameter in [`Gradients::flatten`] order.
    pub fn param_mut(&mut self, mut idx: usize) -> &mut f64 {
        for l in self.hidden.iter_mut().chain(std::iter::once(&mut self.output)) {
            if idx < l.weights.len() {
                return &mut l.weights[idx];
            }
            idx -= l.weights.len();
            if idx < l.bias.len() {
                return &mut l.bias[idx];
            }
            idx -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    pub fn is_finite(&self) -> bool {
        self.layers()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    pub fn forward(&self, x: &Matrix) -> Result<ForwardPass> {
        if x.cols != self.input_dim() {
            return Err(invalid(format!(
                "batch has {} columns, network expects {}",
                x.cols,
                self.input_dim()
            )));
        }
        let mut pre = Vec::with_capacity(self.depth());
        let mut post: Vec<Matrix> = Vec::with_capacity(self.depth());
        for layer in &self.hidden {
            let p = layer.forward(post.last().unwrap_or(x));
            let mut a = p.clone();
            a.data.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            pre.push(p);
            post.push(a);
        }
        let logits = self.output.forward(post.last().unwrap_or(x));
        Ok(ForwardPass { pre, post, logits })
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        let fp = self.forward(x)?;
        Ok((0..fp.logits.rows)
            .map(|b| {
                let r = fp.logits.row(b);
                (0..r.len()).fold(0, |best, c| if r[c] > r[best] { c } else { best })
            })
            .collect())
    }

    /// Penalty value: per hooked layer, the mean of `log((z - zbar)^2 + eps)`
    /// over its entries; layers are summed.
    pub fn penalty(fp: &ForwardPass, entries: &[PenaltyEntry], epsilon: f64) -> f64 {
        let mut per_layer = vec![(0.0, 0usize); fp.post.len()];
        for e in entries {
            let z = fp.post[e.layer].get(e.sample, e.neuron);
            per_layer[e.layer].0 += ms_term(z, e.mean, epsilon);
            per_layer[e.layer].1 += 1;
        }
        per_layer
            .iter()
            .filter(|(_, n)| *n > 0)
            .map(|(s, n)| s / *n as f64)
            .fold(0.0, |a, b| a + b)
    }

    /// Backpropagates `task + lambda * penalty` through the network.
    /// Returns `(task_loss, penalty, gradients)`.
    pub fn backward(
        &self,
        x: &Matrix,
        labels: &[usize],
        fp: &ForwardPass,
        entries: &[PenaltyEntry],
        lambda: f64,
        epsilon: f64,
    ) -> Result<(f64, f64, Gradients)> {
        if labels.len() != x.rows {
            return Err(invalid(format!("{} labels for {} samples", labels.len(), x.rows)));
        }
        let (task, dlogits) = cross_entropy(&fp.logits, labels);
        let penalty = Self::penalty(fp, entries, epsilon);

        // dL/dpost contributions of the penalty, per layer
        let mut extra: Vec<Option<Matrix>> = vec![None; self.depth()];
        if lambda != 0.0 && !entries.is_empty() {
            let mut counts = vec![0usize; self.depth()];
            for e in entries {
                counts[e.layer] += 1;
            }
            for e in entries {
                let m = extra[e.layer].get_or_insert_with(|| {
                    Matrix::zeros(fp.post[e.layer].rows, fp.post[e.layer].cols)
                });
                let z = fp.post[e.layer].get(e.sample, e.neuron);
                let scale = lambda / counts[e.layer] as f64;
                m.data[e.sample * m.cols + e.neuron] += scale * ms_loss_grad(z, e.mean, epsilon);
            }
        }

        let mut grads = Gradients {
            hidden: self.hidden.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect(),
            output: Layer::zeros(self.output.inputs, self.output.outputs),
        };
        let last_in = fp.post.last().unwrap_or(x);
        let mut dpost = self.output.backward(last_in, &dlogits, &mut grads.output);
        for l in (0..self.depth()).rev() {
            if let Some(e) = &extra[l] {
                for (d, g) in dpost.data.iter_mut().zip(&e.data) {
                    *d += g;
                }
            }
            let mut dpre = dpost;
            for ((d, &p), &a) in dpre.data.iter_mut().zip(&fp.pre[l].data).zip(&fp.post[l].data) {
                *d *= self.activation.derivative(p, a);
            }
            let input = if l == 0 { x } else { &fp.post[l - 1] };
            dpost = self.hidden[l].backward(input, &dpre, &mut grads.hidden[l]);
        }
        Ok((task, penalty, grads))
    }

    /// Total objective `task + lambda * penalty` for fixed penalty means.
    pub fn objective(
        &self,
        x: &Matrix,
        labels: &[usize],
        entries: &[PenaltyEntry],
        lambda: f64,
        epsilon: f64,
    ) -> Result<f64> {
        let fp = self.forward(x)?;
        let (task, _) = cross_entropy(&fp.logits, labels);
        Ok(task + lambda * Self::penalty(&fp, entries, epsilon))
    }

    /// Plain gradient descent.
    pub fn apply(&mut self, grads: &Gradients, lr: f64) {
        let pairs = self
            .hidden
            .iter_mut()
            .zip(&grads.hidden)
            .chain(std::iter::once((&mut self.output, &grads.output)));
        for (l, g) in pairs {
            for (w, d) in l.weights.iter_mut().zip(&g.weights) {
                *w -= lr * d;
            }
            for (b, d) in l.bias.iter_mut().zip(&g.bias) {
                *b -= lr * d;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_is_uniform() {
        let net = ToyNet::zeros(3, &[4, 4], 5, Activation::Relu).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 3.0]]).unwrap();
        let fp = net.forward(&x).unwrap();
        assert!(fp.pre.iter().all(|m| m.data.iter().all(|&v| v == 0.0)));
        assert!(fp.logits.data.iter().all(|&v| v == 0.0));
        let (loss, _) = cross_entropy(&fp.logits, &[2]);
        assert!((loss - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn identity_layer_passes_input() {
        let mut net = ToyNet::zeros(3, &[3], 2, Activation::Relu).unwrap();
        for i in 0..3 {
            net.hidden[0].weights[i * 3 + i] = 1.0;
        }
        let x = Matrix::from_rows(&[vec![1.0, 1.0, 1.0]]).unwrap();
        assert_eq!(net.forward(&x).unwrap().post[0].data, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn forward_is_pure_and_relu_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = ToyNet::random(4, &[8, 8, 8], 3, Activation::Relu, &mut rng).unwrap();
        let x = Matrix::from_rows(&[vec![0.5, -1.0, 2.0, 0.1], vec![-0.3, 0.2, 0.0, 1.5]]).unwrap();
        let a = net.forward(&x).unwrap();
        let b = net.forward(&x).unwrap();
        assert_eq!(a, b);
        assert!(a.post.iter().all(|m| m.data.iter().all(|&v| v >= 0.0)));
        assert!(net.forward(&Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn param_indexing_matches_flatten() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = ToyNet::random(2, &[3], 2, Activation::Tanh, &mut rng).unwrap();
        let g = Gradients {
            hidden: net.hidden.clone(),
            output: net.output.clone(),
        };
        let flat = g.flatten();
        assert_eq!(flat.len(), net.n_params());
        for (i, v) in flat.iter().enumerate() {
            assert_eq!(*net.param_mut(i), *v);
        }
    }
}
