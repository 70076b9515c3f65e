use std::path::Path;

use crate::error::Result;
use crate::numerics::TensorArchive;
use crate::reprs::{ModelConfig, SegmentationModel};

/// Writes every parameter, the input standardization and the class
/// embeddings. Layout: see [`TensorArchive`].
pub fn save_checkpoint(model: &SegmentationModel, path: &Path) -> Result<()> {
    model.to_archive().save(path)
}

/// Loads a checkpoint and validates every tensor against `config`.
pub fn load_checkpoint(path: &Path, config: &ModelConfig) -> Result<SegmentationModel> {
    SegmentationModel::from_archive(config.clone(), &TensorArchive::load(path)?)
}
