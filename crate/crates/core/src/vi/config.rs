use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Offsets XOR-ed into the config seed to derive independent generator
/// streams; the seed itself drives initialization and training noise.
pub const EVAL_STREAM: u64 = 0x5eed_0001;
pub const FINAL_STREAM: u64 = 0x5eed_0002;
pub const DATA_STREAM: u64 = 0x5eed_0003;
pub const NLL_STREAM: u64 = 0x5eed_0004;

/// Optimization settings shared by both trainers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_anneal_epochs")]
    pub anneal_epochs: usize,
    /// Data points (VAE) or noise draws (target fits) per step.
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    pub epochs: usize,
    /// Only used by target fits; a VAE epoch is one pass over the data.
    #[serde(default = "default_steps_per_epoch")]
    pub steps_per_epoch: usize,
    pub seed: u64,
    #[serde(default = "default_importance_samples")]
    pub importance_samples: usize,
    /// Draws per evaluation of a free-energy estimate.
    #[serde(default = "default_eval_samples")]
    pub eval_samples: usize,
}

fn default_learning_rate() -> f64 {
    0.0005
}

fn default_anneal_epochs() -> usize {
    100
}

fn default_batch_size() -> usize {
    32
}

fn default_steps_per_epoch() -> usize {
    50
}

fn default_importance_samples() -> usize {
    5000
}

fn default_eval_samples() -> usize {
    2000
}

impl TrainingConfig {
    pub fn new(epochs: usize, seed: u64) -> Self {
        TrainingConfig {
            learning_rate: default_learning_rate(),
            anneal_epochs: default_anneal_epochs(),
            batch_size: default_batch_size(),
            epochs,
            steps_per_epoch: default_steps_per_epoch(),
            seed,
            importance_samples: default_importance_samples(),
            eval_samples: default_eval_samples(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.anneal_epochs == 0 {
            return Err(Error::Config("anneal_epochs must be at least 1".into()));
        }
        if self.batch_size == 0 || self.steps_per_epoch == 0 {
            return Err(Error::Config(
                "batch size and steps per epoch must be positive".into(),
            ));
        }
        if self.importance_samples == 0 || self.eval_samples == 0 {
            return Err(Error::Config("sample counts must be positive".into()));
        }
        Ok(())
    }
}

/// One line of a training trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub beta: f64,
    pub train_f: f64,
    pub val_f: f64,
    /// Seconds since training started.
    pub wallclock: f64,
}
