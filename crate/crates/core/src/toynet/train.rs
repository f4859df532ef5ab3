use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::inhibition::InhibitionConfig;
use crate::io::config::RunConfig;
use crate::selector::MovingThreshold;
use crate::stats::{MsVector, NeuronStatsBank, ScoreMode};

use super::net::{Matrix, PenaltyEntry, ToyNet};
use super::task::{generate_task, TaskData};

/// Indices of the middle two hidden layers (the single layer of a depth-1 net).
pub fn middle_layers(depth: usize) -> Vec<usize> {
    match depth {
        0 => vec![],
        1 => vec![0],
        d => {
            let lo = (d - 2) / 2;
            vec![lo, lo + 1]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub layer: usize,
    /// Threshold after this step's update.
    pub tau_star: f64,
    /// Selected entries; `None` while warming up.
    pub k_star: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub task_loss: f64,
    pub ms_loss: f64,
    pub layers: Vec<LayerRecord>,
}

/// Network plus the monosemanticity machinery attached to its hooked layers.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub net: ToyNet,
    pub hooked: Vec<usize>,
    pub banks: Vec<NeuronStatsBank>,
    /// One threshold per hooked layer over `batch_size * width` entries.
    pub thresholds: Vec<MovingThreshold>,
    pub inhibition: Option<InhibitionConfig>,
    pub learning_rate: f64,
    pub score_mode: ScoreMode,
    pub step: usize,
}

impl TrainState {
    /// `inhibition: None` trains the bare network with no hooks at all.
    pub fn new(
        net: ToyNet,
        inhibition: Option<InhibitionConfig>,
        batch_size: usize,
        learning_rate: f64,
        score_mode: ScoreMode,
    ) -> Result<Self> {
        let mut hooked = Vec::new();
        let mut banks = Vec::new();
        let mut thresholds = Vec::new();
        if let Some(inh) = &inhibition {
            inh.validate(net.depth())?;
            hooked = inh
                .hooked_layers
                .clone()
                .unwrap_or_else(|| middle_layers(net.depth()));
            for &l in &hooked {
                let w = net.hidden[l].outputs;
                banks.push(NeuronStatsBank::new(w)?);
                thresholds.push(MovingThreshold::from_rate(batch_size * w, inh.rate, inh.warmup_batches)?);
            }
        }
        Ok(TrainState {
            net,
            hooked,
            banks,
            thresholds,
            inhibition,
            learning_rate,
            score_mode,
            step: 0,
        })
    }
}

/// Scores every (sample, neuron) entry of one hooked layer in sample order,
/// returning the flattened scores and the mean each entry was scored against.
fn score_layer(bank: &mut NeuronStatsBank, post: &Matrix, mode: ScoreMode) -> Result<(MsVector, Vec<f64>)> {
    let mut ms = MsVector::with_len(post.rows * post.cols);
    let mut means = vec![0.0; post.rows * post.cols];
    let mut row = MsVector::default();
    for b in 0..post.rows {
        let span = b * post.cols..(b + 1) * post.cols;
        if mode == ScoreMode::Causal {
            means[span.clone()].copy_from_slice(bank.means());
        }
        bank.update_and_score_into(post.row(b), mode, &mut row)?;
        if mode == ScoreMode::PostUpdate {
            means[span.clone()].copy_from_slice(bank.means());
        }
        ms.values[span.clone()].copy_from_slice(&row.values);
        ms.valid[span].copy_from_slice(&row.valid);
    }
    Ok((ms, means))
}

/// One optimisation step: forward, score hooked layers, select, backprop
/// task loss plus weighted penalty, gradient descent update.
pub fn train_step(state: &mut TrainState, x: &Matrix, labels: &[usize]) -> Result<StepRecord> {
    let fp = state.net.forward(x)?;
    let mut entries = Vec::new();
    let mut layers = Vec::with_capacity(state.hooked.len());
    let (lambda, epsilon) = state
        .inhibition
        .as_ref()
        .map_or((0.0, 1.0), |i| (i.lambda, i.epsilon));

    for (h, &layer) in state.hooked.iter().enumerate() {
        let post = &fp.post[layer];
        let (ms, means) = score_layer(&mut state.banks[h], post, state.score_mode)?;
        let thr = &mut state.thresholds[h];
        let k_star = if thr.is_warm() {
            let mask = thr.select(&ms)?;
            for (idx, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
                entries.push(PenaltyEntry {
                    layer,
                    sample: idx / post.cols,
                    neuron: idx % post.cols,
                    mean: means[idx],
                });
            }
            thr.last_k_star()
        } else {
            thr.warmup_observe(&ms)?;
            None
        };
        layers.push(LayerRecord {
            layer,
            tau_star: thr.tau_star(),
            k_star,
        });
    }

    let (task_loss, ms_loss, grads) = state.net.backward(x, labels, &fp, &entries, lambda, epsilon)?;
    if !task_loss.is_finite() || !ms_loss.is_finite() {
        return Err(Error::TrainingDiverged { step: state.step });
    }
    state.net.apply(&grads, state.learning_rate);
    if !state.net.is_finite() {
        return Err(Error::TrainingDiverged { step: state.step });
    }
    let rec = StepRecord {
        step: state.step,
        task_loss,
        ms_loss,
        layers,
    };
    state.step += 1;
    Ok(rec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub arm: String,
    pub seed: u64,
    pub lambda: f64,
    pub hooked_layers: Vec<usize>,
    pub steps: Vec<StepRecord>,
    pub final_eval_accuracy: f64,
    pub final_task_loss: f64,
    /// Final threshold per hooked layer, in `hooked_layers` order.
    pub final_tau: Vec<f64>,
    pub config: RunConfig,
}

impl TrainingReport {
    /// Mean final threshold over the hooked layers.
    pub fn mean_final_tau(&self) -> f64 {
        self.final_tau.iter().sum::<f64>() / self.final_tau.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config_hash: String,
    pub baseline: TrainingReport,
    pub l2e: TrainingReport,
}

fn accuracy(net: &ToyNet, data: &crate::feature::FeatureDataset) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let x = Matrix::from_rows(&data.inputs)?;
    let pred = net.predict(&x)?;
    let hits = pred.iter().zip(&data.labels).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / data.len() as f64)
}

/// Trains one arm on pre-generated data. `config` must be resolved.
pub fn train_arm(config: &RunConfig, arm: &str, data: &TaskData) -> Result<TrainingReport> {
    let snapshot = config.snapshot()?;
    let bs = snapshot.train.batch_size;
    if data.train.len() < bs {
        return Err(invalid(format!(
            "training set of {} smaller than batch size {bs}",
            data.train.len()
        )));
    }
    let mut init_rng = ChaCha8Rng::seed_from_u64(snapshot.seed.wrapping_add(0x5eed_0001));
    let mut order_rng = ChaCha8Rng::seed_from_u64(snapshot.seed.wrapping_add(0x5eed_0002));
    let widths = vec![snapshot.net.width; snapshot.net.depth];
    let net = ToyNet::random(
        snapshot.task.input_dim,
        &widths,
        snapshot.task.n_features,
        snapshot.net.activation,
        &mut init_rng,
    )?;
    let mut state = TrainState::new(
        net,
        Some(snapshot.inhibition.clone()),
        bs,
        snapshot.train.learning_rate,
        snapshot.train.score_mode,
    )?;

    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut steps = Vec::new();
    let mut last_loss = f64::NAN;
    for _ in 0..snapshot.train.epochs {
        order.shuffle(&mut order_rng);
        for chunk in order.chunks_exact(bs) {
            let rows: Vec<Vec<f64>> = chunk.iter().map(|&i| data.train.inputs[i].clone()).collect();
            let y: Vec<usize> = chunk.iter().map(|&i| data.train.labels[i]).collect();
            let rec = train_step(&mut state, &Matrix::from_rows(&rows)?, &y)?;
            last_loss = rec.task_loss;
            steps.push(rec);
        }
    }

    Ok(TrainingReport {
        arm: arm.to_string(),
        seed: snapshot.seed,
        lambda: snapshot.inhibition.lambda,
        hooked_layers: state.hooked.clone(),
        steps,
        final_eval_accuracy: accuracy(&state.net, &data.eval)?,
        final_task_loss: last_loss,
        final_tau: state.thresholds.iter().map(|t| t.tau_star()).collect(),
        config: snapshot,
    })
}

/// Paired run: identical data, initialisation and batch order; the
/// baseline arm has `lambda = 0`.
pub fn run_experiment(config: &RunConfig) -> Result<ExperimentReport> {
    let config = config.clone().resolve()?;
    let data = generate_task(&config.task, config.seed)?;
    let mut base_cfg = config.clone();
    base_cfg.inhibition.lambda = 0.0;
    let baseline = train_arm(&base_cfg, "baseline", &data)?;
    let l2e = train_arm(&config, "l2e", &data)?;
    Ok(ExperimentReport {
        config_hash: config.hash()?,
        baseline,
        l2e,
    })
}
