use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::inhibition::InhibitionConfig;
use crate::stats::ScoreMode;
use crate::toynet::{middle_layers, Activation, SyntheticFeatureTask};

use super::report::config_hash;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    /// Hidden layer count.
    pub depth: usize,
    pub width: usize,
    pub activation: Activation,
    /// Hook every hidden layer instead of the middle two. Ignored when
    /// `inhibition.hooked_layers` is set explicitly.
    pub hook_all_layers: bool,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            depth: 6,
            width: 32,
            activation: Activation::Relu,
            hook_all_layers: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub score_mode: ScoreMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 32,
            learning_rate: 0.05,
            score_mode: ScoreMode::PostUpdate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

/// Everything needed to reproduce a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct RunConfig {
    pub seed: u64,
    pub task: SyntheticFeatureTask,
    pub net: NetConfig,
    pub inhibition: InhibitionConfig,
    pub train: TrainConfig,
    pub output: OutputConfig,
}


impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Fills every derived default in place and validates the result.
    pub fn resolve(mut self) -> Result<Self> {
        if self.net.depth == 0 || self.net.width == 0 {
            return Err(invalid("net depth and width must be positive"));
        }
        if self.train.epochs == 0 || self.train.batch_size == 0 {
            return Err(invalid("epochs and batch_size must be positive"));
        }
        if !(self.train.learning_rate > 0.0 && self.train.learning_rate.is_finite()) {
            return Err(invalid("learning_rate must be positive"));
        }
        self.task.seed.get_or_insert(self.seed);
        if self.inhibition.hooked_layers.is_none() {
            self.inhibition.hooked_layers = Some(if self.net.hook_all_layers {
                (0..self.net.depth).collect()
            } else {
                middle_layers(self.net.depth)
            });
        }
        self.inhibition.validate(self.net.depth)?;
        Ok(self)
    }

    /// The configuration as recorded in reports: resolved, without output
    /// locations.
    pub fn snapshot(&self) -> Result<Self> {
        let mut s = self.clone().resolve()?;
        s.output = OutputConfig::default();
        Ok(s)
    }

    pub fn hash(&self) -> Result<String> {
        Ok(config_hash(&self.snapshot()?))
    }
}
