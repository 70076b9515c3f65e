use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{AdamConfig, Precision};
use crate::objective::LossConfig;
use crate::reprs::ModelConfig;
use crate::scenegen::{AugmentStrength, SceneConfig};

/// Everything that determines a training run besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_scenes: usize,
    /// Points sampled from each scene per step.
    pub points_per_scene: usize,
    pub k_neighbors: usize,
    pub seed: u64,
    pub precision: Precision,
    pub adam: AdamConfig,
    pub model: ModelConfig,
    pub loss: LossConfig,
    /// Views used by the consistency variant.
    pub weak_augment: AugmentStrength,
    pub strong_augment: AugmentStrength,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_scenes: 4,
            points_per_scene: 256,
            k_neighbors: 96,
            seed: 0,
            precision: Precision::Double,
            adam: AdamConfig::default(),
            model: ModelConfig::default(),
            loss: LossConfig::default(),
            weak_augment: AugmentStrength::weak(),
            strong_augment: AugmentStrength::strong(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_scenes == 0 || self.points_per_scene == 0 {
            return Err(Error::Config("batch_scenes and points_per_scene must be >= 1".into()));
        }
        if self.k_neighbors < 3 {
            return Err(Error::Config(format!("k_neighbors must be >= 3, got {}", self.k_neighbors)));
        }
        if !(self.adam.lr > 0.0 && self.adam.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be > 0, got {}", self.adam.lr)));
        }
        self.model.validate()?;
        self.loss.validate()
    }
}

/// Synthetic data set sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    pub train_scenes: usize,
    pub test_scenes: usize,
    pub scene: SceneConfig,
    pub embedding_noise: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            train_scenes: 40,
            test_scenes: 20,
            scene: SceneConfig::default(),
            embedding_noise: 0.05,
        }
    }
}
