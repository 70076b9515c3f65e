//! Training, inference, metrics, checkpoints and the ablation harness.

mod ablation;
mod checkpoint;
mod config;
mod data;
mod gradcheck;
mod infer;
mod metrics;
mod train;

pub use ablation::{run_ablation_grid, AblationCell, AblationTable, CellSummary, GridSpec, SeedRun, Stat};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::{DataConfig, TrainConfig};
pub use data::{read_dataset, synthetic_dataset, write_dataset, Dataset, TrainingSet};
pub use gradcheck::{run_gradcheck_suite, BlockCheck, GradcheckConfig};
pub use infer::{argmax_lowest, infer_scene, predict_from_similarity, Prediction};
pub use metrics::{compute_metrics, hiou, MetricsReport};
pub use train::{train, EpochRecord, StepRecord, TrainLog, TrainOutcome};

use crate::error::Result;
use crate::reprs::SegmentationModel;
use crate::scenegen::{Scene, SplitSpec};

/// Predicts every point of `scenes` and scores the concatenation.
pub fn evaluate(model: &SegmentationModel, scenes: &[Scene], split: &SplitSpec, k_neighbors: usize) -> Result<MetricsReport> {
    let mut predictions = Vec::new();
    let mut truth = Vec::new();
    for scene in scenes {
        predictions.extend(infer_scene(scene, model, k_neighbors)?.classes);
        truth.extend_from_slice(&scene.labels);
    }
    compute_metrics(&predictions, &truth, split)
}

/// Trains on `data.train` and evaluates on `data.test`.
pub fn train_and_evaluate(config: &TrainConfig, data: &Dataset) -> Result<(TrainOutcome, MetricsReport)> {
    let outcome = train(config, data.training_set())?;
    let metrics = evaluate(&outcome.model, &data.test, &data.split, config.k_neighbors)?;
    Ok((outcome, metrics))
}
