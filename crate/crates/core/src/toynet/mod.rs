//! A small fully connected classifier with hand-written backpropagation and
//! activation hooks, used to exercise the statistics bank, the moving
//! threshold and the inhibition loss inside a real training loop.

mod net;
mod task;
mod train;

pub use net::{cross_entropy, Activation, ForwardPass, Gradients, Layer, Matrix, PenaltyEntry, ToyNet};
pub use task::{generate_task, SyntheticFeatureTask, TaskData};
pub use train::{
    middle_layers, run_experiment, train_arm, train_step, ExperimentReport, LayerRecord, StepRecord,
    TrainState, TrainingReport,
};
