use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::{concatenate, Array2, Axis};
use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{derive_seed, seeded_rng, AdamState, ParamContainer};
use crate::objective::{seen_mass, total_loss, Batch, Variant};
use crate::reprs::{point_descriptor, point_descriptor_at, SegmentationModel};
use crate::scenegen::{augment_scene, Scene, UNLABELED};

use super::config::TrainConfig;
use super::data::TrainingSet;
use super::infer::argmax_lowest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
    pub seen: f64,
    pub auxiliary: f64,
}

/// Per-epoch means of the step records plus two label-free diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub steps: usize,
    pub loss: f64,
    pub seen: f64,
    pub auxiliary: f64,
    /// Accuracy on the labeled (seen) points of the sampled batches.
    pub seen_accuracy: f64,
    /// Softmax mass that unlabeled points put on seen classes.
    pub unlabeled_seen_mass: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
    /// Degenerate-loss warnings with their number of occurrences.
    pub warnings: BTreeMap<String, usize>,
}

impl TrainLog {
    /// One row per epoch, for external plotting.
    pub fn epochs_csv(&self) -> String {
        let mut out = String::from("epoch,steps,loss,seen,auxiliary,seen_accuracy,unlabeled_seen_mass\n");
        for e in &self.epochs {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                e.epoch, e.steps, e.loss, e.seen, e.auxiliary, e.seen_accuracy, e.unlabeled_seen_mass
            );
        }
        out
    }

    pub fn loss_sequence(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.loss).collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SegmentationModel,
    pub log: TrainLog,
}

/// Trains a model on masked scenes.
///
/// Every scene must be masked: a point labeled with an unseen class is an
/// error. Descriptors are computed once per scene; each step samples
/// `points_per_scene` points from each of `batch_scenes` scenes.
pub fn train(config: &TrainConfig, data: TrainingSet<'_>) -> Result<TrainOutcome> {
    config.validate()?;
    check_training_set(config, &data)?;
    let descriptors = data
        .scenes
        .iter()
        .map(|s| point_descriptor(s, config.k_neighbors))
        .collect::<Result<Vec<_>>>()?;

    let mut model = SegmentationModel::new(
        config.model.clone(),
        data.embeddings.vectors.clone(),
        derive_seed(config.seed, "model", 0),
    )?;
    let views: Vec<_> = descriptors.iter().map(|d| d.view()).collect();
    model.backbone.fit_normalization(concatenate(Axis(0), &views).map_err(shape_err)?.view())?;

    let mut adam = AdamState::new(config.adam).with_precision(config.precision);
    let mut log = TrainLog::default();
    let mut step = 0usize;
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..data.scenes.len()).collect();
        order.shuffle(&mut seeded_rng(derive_seed(config.seed, "epoch-order", epoch as u64)));
        let mut acc = EpochAccumulator::default();
        for chunk in order.chunks(config.batch_scenes) {
            let record = train_step(config, &data, &descriptors, &mut model, &mut adam, chunk, epoch, step, &mut log, &mut acc)
                .map_err(|e| match e {
                    Error::Numeric(m) => Error::Numeric(format!("step {step}: {m}")),
                    other => other,
                })?;
            log.steps.push(record);
            step += 1;
        }
        log.epochs.push(acc.finish(epoch));
    }
    Ok(TrainOutcome { model, log })
}

fn shape_err(e: ndarray::ShapeError) -> Error {
    Error::Numeric(format!("stacking descriptors: {e}"))
}

fn check_training_set(config: &TrainConfig, data: &TrainingSet<'_>) -> Result<()> {
    let c = data.split.class_count();
    if data.scenes.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    if data.embeddings.class_count() != c {
        return Err(Error::shape("embeddings vs split classes", c, data.embeddings.class_count()));
    }
    if data.embeddings.dim() != config.model.embedding_dim {
        return Err(Error::shape(
            "embedding dim vs model.embedding_dim",
            config.model.embedding_dim,
            data.embeddings.dim(),
        ));
    }
    for (s, scene) in data.scenes.iter().enumerate() {
        scene.validate()?;
        if scene.class_count != c {
            return Err(Error::shape(format!("class count of training scene {s}"), c, scene.class_count));
        }
        if let Some(i) = scene
            .labels
            .iter()
            .position(|&l| l != UNLABELED && data.split.is_unseen(l as usize))
        {
            return Err(Error::Validation(format!(
                "training scene {s} point {i} carries unseen class {}; mask the scene first",
                scene.labels[i]
            )));
        }
    }
    Ok(())
}

#[derive(Default)]
struct EpochAccumulator {
    steps: usize,
    loss: f64,
    seen: f64,
    auxiliary: f64,
    correct: usize,
    labeled: usize,
    mass: f64,
    mass_steps: usize,
}

impl EpochAccumulator {
    fn finish(self, epoch: usize) -> EpochRecord {
        let n = self.steps.max(1) as f64;
        EpochRecord {
            epoch,
            steps: self.steps,
            loss: self.loss / n,
            seen: self.seen / n,
            auxiliary: self.auxiliary / n,
            seen_accuracy: if self.labeled == 0 { 0.0 } else { self.correct as f64 / self.labeled as f64 },
            unlabeled_seen_mass: if self.mass_steps == 0 { 0.0 } else { self.mass / self.mass_steps as f64 },
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn train_step(
    config: &TrainConfig,
    data: &TrainingSet<'_>,
    descriptors: &[Array2<f64>],
    model: &mut SegmentationModel,
    adam: &mut AdamState,
    chunk: &[usize],
    epoch: usize,
    step: usize,
    log: &mut TrainLog,
    acc: &mut EpochAccumulator,
) -> Result<StepRecord> {
    let mut rng = seeded_rng(derive_seed(config.seed, "step", step as u64));
    let self_variant = config.loss.variant == Variant::SeenPlusSelf;
    let mut inputs = Vec::with_capacity(chunk.len());
    let mut weak_inputs = Vec::new();
    let mut labels = Vec::new();
    for &s in chunk {
        let scene: &Scene = &data.scenes[s];
        let n = scene.len();
        let mut idx = if n <= config.points_per_scene {
            (0..n).collect::<Vec<_>>()
        } else {
            index::sample(&mut rng, n, config.points_per_scene).into_vec()
        };
        idx.sort_unstable();
        labels.extend(idx.iter().map(|&i| scene.labels[i]));
        if self_variant {
            let weak = augment_scene(scene, &config.weak_augment, &mut rng);
            let strong = augment_scene(scene, &config.strong_augment, &mut rng);
            weak_inputs.push(point_descriptor_at(&weak, &idx, config.k_neighbors)?);
            inputs.push(point_descriptor_at(&strong, &idx, config.k_neighbors)?);
        } else {
            inputs.push(descriptors[s].select(Axis(0), &idx));
        }
    }
    let stack = |parts: &[Array2<f64>]| {
        let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
        concatenate(Axis(0), &views).map_err(shape_err)
    };
    let x = stack(&inputs)?;
    let (d, cache) = model.forward(x.view())?;
    let weak_d = if self_variant {
        Some(model.forward(stack(&weak_inputs)?.view())?.0)
    } else {
        None
    };
    let batch = Batch::from_labels(d.view(), &labels, data.split)?;
    let loss = total_loss(&batch, &config.loss, weak_d.as_ref().map(|w| w.view()))?;
    for w in &loss.warnings {
        *log.warnings.entry(w.clone()).or_default() += 1;
    }

    acc.steps += 1;
    acc.loss += loss.value;
    acc.seen += loss.seen;
    acc.auxiliary += loss.auxiliary;
    for (&r, &y) in batch.seen_rows.iter().zip(&batch.seen_labels) {
        acc.labeled += 1;
        acc.correct += usize::from(argmax_lowest(d.row(r)) == y);
    }
    if !batch.unseen_rows.is_empty() {
        acc.mass += seen_mass(&batch, config.loss.tau_u)?;
        acc.mass_steps += 1;
    }

    model.zero_grads();
    model.backward(&cache, loss.grad.view())?;
    adam.update(&mut model.params_mut())?;
    Ok(StepRecord {
        epoch,
        step,
        loss: loss.value,
        seen: loss.seen,
        auxiliary: loss.auxiliary,
    })
}
