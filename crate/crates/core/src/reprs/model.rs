use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{derive_seed, seeded_rng, ParamContainer, ParamTensor, TensorArchive};

use super::backbone::{Backbone, BackboneCache};
use super::descriptor::DESCRIPTOR_DIM;
use super::kernels::{GeneratorCache, SemanticGenerator, SemanticKernelBank};
use super::prototypes::{AttentionCache, PrototypeBank};
use super::similarity::{similarity, similarity_backward};

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub descriptor_dim: usize,
    pub backbone_hidden: usize,
    pub feature_dim: usize,
    pub attention_dim: usize,
    pub prototypes: usize,
    pub kernels: usize,
    pub generator_hidden: usize,
    pub embedding_dim: usize,
    pub lambda: f64,
    /// When false the visual representation is the raw backbone feature.
    pub use_prototypes: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            descriptor_dim: DESCRIPTOR_DIM,
            backbone_hidden: 96,
            feature_dim: 96,
            attention_dim: 16,
            prototypes: 128,
            kernels: 16,
            generator_hidden: 96,
            embedding_dim: 600,
            lambda: 4.0,
            use_prototypes: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("descriptor_dim", self.descriptor_dim),
            ("backbone_hidden", self.backbone_hidden),
            ("feature_dim", self.feature_dim),
            ("attention_dim", self.attention_dim),
            ("prototypes", self.prototypes),
            ("kernels", self.kernels),
            ("generator_hidden", self.generator_hidden),
            ("embedding_dim", self.embedding_dim),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("model.{name} must be >= 1")));
            }
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::Config(format!("model.lambda must be finite and >= 0, got {}", self.lambda)));
        }
        Ok(())
    }

    /// Width of the visual representation (`M`, or `F` without prototypes).
    pub fn repr_dim(&self) -> usize {
        if self.use_prototypes {
            self.prototypes
        } else {
            self.feature_dim
        }
    }
}

/// Descriptor -> features -> alpha -> kernels -> similarity `D`.
///
/// The class embeddings are fixed inputs owned by the model so a checkpoint
/// is self-contained.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationModel {
    config: ModelConfig,
    pub backbone: Backbone,
    pub prototypes: Option<PrototypeBank>,
    pub generator: SemanticGenerator,
    embeddings: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct ModelCache {
    backbone: BackboneCache,
    attention: Option<AttentionCache>,
    vis: Array2<f64>,
    generator: GeneratorCache,
    aggregate: Array2<f64>,
}

impl ModelCache {
    /// The visual representation used to build `D`.
    pub fn visual(&self) -> ArrayView2<'_, f64> {
        self.vis.view()
    }
}

const SHIFT: &str = "backbone.input_shift";
const SCALE: &str = "backbone.input_scale";
const EMBEDDINGS: &str = "embeddings";

impl SegmentationModel {
    pub fn new(config: ModelConfig, embeddings: Array2<f64>, seed: u64) -> Result<Self> {
        config.validate()?;
        if embeddings.ncols() != config.embedding_dim || embeddings.nrows() == 0 {
            return Err(Error::shape("class embeddings", ("C>0", config.embedding_dim), embeddings.dim()));
        }
        let mut rng = seeded_rng(derive_seed(seed, "model-init", 0));
        let backbone = Backbone::new(config.descriptor_dim, config.backbone_hidden, config.feature_dim, &mut rng);
        let prototypes = if config.use_prototypes {
            Some(PrototypeBank::new(
                config.prototypes,
                config.feature_dim,
                config.attention_dim,
                config.lambda,
                &mut rng,
            )?)
        } else {
            None
        };
        let generator = SemanticGenerator::new(
            config.embedding_dim,
            config.generator_hidden,
            config.repr_dim(),
            config.kernels,
            &mut rng,
        )?;
        Ok(Self {
            config,
            backbone,
            prototypes,
            generator,
            embeddings,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn class_count(&self) -> usize {
        self.embeddings.nrows()
    }

    pub fn embeddings(&self) -> ArrayView2<'_, f64> {
        self.embeddings.view()
    }

    pub fn kernel_bank(&self) -> Result<SemanticKernelBank> {
        Ok(self.generator.forward(self.embeddings.view())?.0)
    }

    /// Visual representation without caching (alpha, or raw features).
    pub fn visual(&self, descriptors: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let (features, _) = self.backbone.forward(descriptors)?;
        match &self.prototypes {
            Some(bank) => Ok(bank.forward(features.view())?.0.alpha),
            None => Ok(features),
        }
    }

    /// Returns the `T x C` similarity matrix and the cache for [`Self::backward`].
    pub fn forward(&self, descriptors: ArrayView2<'_, f64>) -> Result<(Array2<f64>, ModelCache)> {
        let (features, backbone) = self.backbone.forward(descriptors)?;
        let (vis, attention) = match &self.prototypes {
            Some(bank) => {
                let (v, c) = bank.forward(features.view())?;
                (v.alpha, Some(c))
            }
            None => (features, None),
        };
        let (kernels, generator) = self.generator.forward(self.embeddings.view())?;
        let d = similarity(vis.view(), &kernels)?;
        let cache = ModelCache {
            backbone,
            attention,
            vis,
            generator,
            aggregate: kernels.aggregate,
        };
        Ok((d, cache))
    }

    /// Accumulates parameter gradients for an upstream `dL/dD`.
    pub fn backward(&mut self, cache: &ModelCache, grad_d: ArrayView2<'_, f64>) -> Result<()> {
        let (grad_vis, grad_agg) = similarity_backward(cache.vis.view(), cache.aggregate.view(), grad_d)?;
        self.generator.backward_aggregate(&cache.generator, grad_agg.view())?;
        let grad_features = match (&mut self.prototypes, &cache.attention) {
            (Some(bank), Some(att)) => bank.backward(att, grad_vis.view())?,
            (None, None) => grad_vis,
            _ => return Err(Error::Numeric("model cache does not match model structure".into())),
        };
        self.backbone.backward(&cache.backbone, grad_features.view())
    }

    pub fn to_archive(&self) -> TensorArchive {
        let mut archive = TensorArchive::new();
        for p in self.params() {
            archive.push(p.name(), p.values().to_owned());
        }
        archive.push(SHIFT, self.backbone.input_shift.clone().insert_axis(Axis(0)));
        archive.push(SCALE, self.backbone.input_scale.clone().insert_axis(Axis(0)));
        archive.push(EMBEDDINGS, self.embeddings.clone());
        archive
    }

    /// Rebuilds a model from `archive`, checking every tensor against the
    /// shapes implied by `config`.
    pub fn from_archive(config: ModelConfig, archive: &TensorArchive) -> Result<Self> {
        let embeddings = fetch(archive, EMBEDDINGS)?.clone();
        let mut model = Self::new(config, embeddings, 0)?;
        let expected = model.params().len() + 3;
        if archive.entries.len() != expected {
            let known: Vec<String> = model.params().iter().map(|p| p.name().to_string()).collect();
            let extra: Vec<&str> = archive
                .entries
                .iter()
                .map(|(n, _)| n.as_str())
                .filter(|n| !known.iter().any(|k| k == n) && ![SHIFT, SCALE, EMBEDDINGS].contains(n))
                .collect();
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} tensors, model expects {expected}; unexpected: {extra:?}",
                archive.entries.len()
            )));
        }
        for p in model.params_mut() {
            let values = fetch(archive, p.name())?;
            if values.dim() != p.shape() {
                return Err(Error::shape(format!("checkpoint tensor '{}'", p.name()), p.shape(), values.dim()));
            }
            p.set_values(values.clone())?;
        }
        let d = model.backbone.input_dim();
        model.backbone.input_shift = row_vector(archive, SHIFT, d)?;
        model.backbone.input_scale = row_vector(archive, SCALE, d)?;
        Ok(model)
    }
}

fn fetch<'a>(archive: &'a TensorArchive, name: &str) -> Result<&'a Array2<f64>> {
    archive
        .get(name)
        .ok_or_else(|| Error::Checkpoint(format!("checkpoint is missing tensor '{name}'")))
}

fn row_vector(archive: &TensorArchive, name: &str, len: usize) -> Result<Array1<f64>> {
    let a = fetch(archive, name)?;
    if a.dim() != (1, len) {
        return Err(Error::shape(format!("checkpoint tensor '{name}'"), (1, len), a.dim()));
    }
    Ok(a.row(0).to_owned())
}

impl ParamContainer for SegmentationModel {
    fn params(&self) -> Vec<&ParamTensor> {
        let mut v = self.backbone.params();
        if let Some(bank) = &self.prototypes {
            v.extend(bank.params());
        }
        v.extend(self.generator.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut v = self.backbone.params_mut();
        if let Some(bank) = &mut self.prototypes {
            v.extend(bank.params_mut());
        }
        v.extend(self.generator.params_mut());
        v
    }
}
