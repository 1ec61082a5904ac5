//! The experiment configuration document shared by every command.

use std::path::Path;

use serde::{Deserialize, Serialize};
use snf_core::amortize::{AmortizationConfig, FlowFamily};
use snf_core::linalg::BjorckSettings;
use snf_core::vi::{TargetSpec, TrainingConfig, VaeConfig};

use crate::CliError;

/// Model sizes use the single-letter names of the amortization formulas:
/// `D` latent, `M` Sylvester bottleneck, `H` Householder reflections,
/// `C` MADE width, `K` flows, `E` encoder features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub variant: FlowFamily,
    #[serde(rename = "D")]
    pub d: usize,
    /// Defaults to `D`.
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Defaults to `D`.
    #[serde(rename = "H", default, skip_serializing_if = "Option::is_none")]
    pub h: Option<usize>,
    /// Defaults to `2D`.
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<usize>,
    #[serde(rename = "K")]
    pub k: usize,
    /// Required by `train-vae` and `params`; `fit-target` always uses 1.
    #[serde(rename = "E", default, skip_serializing_if = "Option::is_none")]
    pub e: Option<usize>,
    pub seed: u64,
    pub epochs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anneal_epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps_per_epoch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub importance_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bjorck: Option<BjorckSettings>,
    /// Only for `fit-target`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetSpec>,
    /// Only for `train-vae`; every field has a default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vae: Option<VaeConfig>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    pub fn training(&self) -> Result<TrainingConfig, CliError> {
        let mut t = TrainingConfig::new(self.epochs, self.seed);
        if let Some(x) = self.learning_rate {
            t.learning_rate = x;
        }
        if let Some(x) = self.anneal_epochs {
            t.anneal_epochs = x;
        }
        if let Some(x) = self.batch_size {
            t.batch_size = x;
        }
        if let Some(x) = self.steps_per_epoch {
            t.steps_per_epoch = x;
        }
        if let Some(x) = self.importance_samples {
            t.importance_samples = x;
        }
        if let Some(x) = self.eval_samples {
            t.eval_samples = x;
        }
        t.validate().map_err(CliError::from_core)?;
        Ok(t)
    }

    pub fn amortization(&self, feature_dim: usize) -> Result<AmortizationConfig, CliError> {
        let mut a = AmortizationConfig::new(self.variant, feature_dim, self.d, self.k);
        a.bottleneck = self.m.unwrap_or(a.bottleneck);
        a.reflections = self.h.unwrap_or(a.reflections);
        a.made_width = self.c.unwrap_or(a.made_width);
        a.bjorck = self.bjorck.unwrap_or(a.bjorck);
        a.validate().map_err(CliError::from_core)?;
        Ok(a)
    }

    pub fn feature_dim(&self) -> Result<usize, CliError> {
        self.e
            .ok_or_else(|| CliError::config("this command needs the encoder width E"))
    }
}
