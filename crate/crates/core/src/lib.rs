//! Streaming monosemanticity analysis and inhibition.
//!
//! The crate is organised bottom-up:
//!
//! * [`stats`] keeps per-neuron running statistics and turns them into
//!   Monosemanticity Scores (MS), the squared deviation of an output from the
//!   neuron's mean normalised by its sample variance.
//! * [`feature`] aggregates MS by labelled feature, finds each neuron's
//!   relatively monosemantic feature and compares MS distributions with the
//!   two-sample Kolmogorov-Smirnov statistic.
//! * [`selector`] picks the most monosemantic neurons with a warmed-up moving
//!   threshold and measures the False Killing Rate of a selection level.
//! * [`inhibition`] is the log-stabilised penalty added to a training loss.
//! * [`toynet`] is a small hand-differentiated classifier that wires the
//!   pieces above into a training loop.
//! * [`io`] holds the binary activation dump, run configuration and CSV
//!   reports; [`gen`] synthesises dumps with known ground truth.
//!
//! Data-parallel kernels use rayon when the `parallel` feature is enabled
//! (the default) and fall back to plain iterators otherwise. Both variants
//! are always reachable through [`kernels`] so they can be benchmarked
//! against each other.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod feature;
pub mod gen;
pub mod inhibition;
pub mod io;
pub mod kernels;
pub mod selector;
pub mod stats;
pub mod toynet;

pub use error::{Error, Result};
pub use feature::{FeatureDataset, FeaturePartitionReport};
pub use inhibition::InhibitionConfig;
pub use selector::{FkrReport, MovingThreshold};
pub use stats::{MsVector, NeuronStatsBank, ScoreMode};
