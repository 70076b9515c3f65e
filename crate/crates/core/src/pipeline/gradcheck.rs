//! Finite-difference verification of every differentiable block on a random
//! micro-batch.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    derive_seed, gradient_check, seeded_rng, uniform_matrix, GradCheckOptions, GradCheckReport, ParamContainer,
    ParamTensor, Rng64,
};
use crate::objective::{
    consistency_loss, pseudo_label_loss, seen_loss, total_loss, unknown_aware_loss, Batch, LossConfig, LossTerm,
    Variant,
};
use crate::reprs::{similarity_backward, Backbone, ModelConfig, PrototypeBank, SegmentationModel, SemanticGenerator};
use crate::scenegen::SplitSpec;

/// Micro-batch sizes and finite-difference settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GradcheckConfig {
    pub points: usize,
    pub classes: usize,
    pub unseen_classes: usize,
    pub descriptor_dim: usize,
    pub hidden_dim: usize,
    pub feature_dim: usize,
    pub attention_dim: usize,
    pub prototypes: usize,
    pub kernels: usize,
    pub embedding_dim: usize,
    pub step: f64,
    pub tolerance: f64,
    /// See [`GradCheckOptions::abs_floor`].
    pub abs_floor: f64,
    pub max_entries_per_param: usize,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            points: 16,
            classes: 5,
            unseen_classes: 2,
            descriptor_dim: 8,
            hidden_dim: 7,
            feature_dim: 6,
            attention_dim: 4,
            prototypes: 8,
            kernels: 4,
            embedding_dim: 10,
            step: 1e-5,
            tolerance: 1e-4,
            abs_floor: GradCheckOptions::default().abs_floor,
            max_entries_per_param: 64,
        }
    }
}

impl GradcheckConfig {
    pub fn validate(&self) -> Result<()> {
        if self.points < 2 || self.classes < 2 {
            return Err(Error::Config("gradcheck needs >= 2 points and >= 2 classes".into()));
        }
        if self.unseen_classes == 0 || self.unseen_classes >= self.classes {
            return Err(Error::Config(format!(
                "gradcheck.unseen_classes must be in [1, {}), got {}",
                self.classes, self.unseen_classes
            )));
        }
        self.model_config(true).validate()
    }

    fn model_config(&self, use_prototypes: bool) -> ModelConfig {
        ModelConfig {
            descriptor_dim: self.descriptor_dim,
            backbone_hidden: self.hidden_dim,
            feature_dim: self.feature_dim,
            attention_dim: self.attention_dim,
            prototypes: self.prototypes,
            kernels: if use_prototypes { self.kernels } else { 1 },
            generator_hidden: self.hidden_dim,
            embedding_dim: self.embedding_dim,
            lambda: 4.0,
            use_prototypes,
        }
    }

    fn options(&self, seed: u64) -> GradCheckOptions {
        GradCheckOptions {
            step: self.step,
            tolerance: self.tolerance,
            abs_floor: self.abs_floor,
            max_entries_per_param: self.max_entries_per_param,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockCheck {
    pub block: String,
    pub report: GradCheckReport,
}

impl BlockCheck {
    pub fn passed(&self) -> bool {
        self.report.passed()
    }
}

/// A block's parameters plus extra tensors (block inputs or free operands)
/// whose gradients are checked alongside.
struct Probe<B> {
    block: B,
    tensors: Vec<ParamTensor>,
}

trait Blocky {
    fn block_params(&self) -> Vec<&ParamTensor>;
    fn block_params_mut(&mut self) -> Vec<&mut ParamTensor>;
}

impl Blocky for () {
    fn block_params(&self) -> Vec<&ParamTensor> {
        Vec::new()
    }
    fn block_params_mut(&mut self) -> Vec<&mut ParamTensor> {
        Vec::new()
    }
}

macro_rules! blocky {
    ($t:ty) => {
        impl Blocky for $t {
            fn block_params(&self) -> Vec<&ParamTensor> {
                self.params()
            }
            fn block_params_mut(&mut self) -> Vec<&mut ParamTensor> {
                self.params_mut()
            }
        }
    };
}
blocky!(Backbone);
blocky!(PrototypeBank);
blocky!(SemanticGenerator);

impl<B: Blocky> ParamContainer for Probe<B> {
    fn params(&self) -> Vec<&ParamTensor> {
        let mut v = self.block.block_params();
        v.extend(self.tensors.iter());
        v
    }
    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut v = self.block.block_params_mut();
        v.extend(self.tensors.iter_mut());
        v
    }
}

struct MicroBatch {
    split: SplitSpec,
    seen_rows: Vec<usize>,
    seen_labels: Vec<usize>,
    unseen_rows: Vec<usize>,
}

impl MicroBatch {
    fn random(cfg: &GradcheckConfig, rng: &mut Rng64) -> Result<Self> {
        let unseen: Vec<usize> = (cfg.classes - cfg.unseen_classes..cfg.classes).collect();
        let split = SplitSpec::holding_out(cfg.classes, &unseen)?;
        let seen: Vec<usize> = (0..cfg.classes).filter(|&c| split.is_seen(c)).collect();
        let (mut seen_rows, mut seen_labels, mut unseen_rows) = (Vec::new(), Vec::new(), Vec::new());
        for t in 0..cfg.points {
            // Guarantees both row sets are non-empty.
            let labeled = match t {
                0 => true,
                1 => false,
                _ => rng.random_bool(0.5),
            };
            if labeled {
                seen_rows.push(t);
                seen_labels.push(seen[rng.random_range(0..seen.len())]);
            } else {
                unseen_rows.push(t);
            }
        }
        Ok(Self {
            split,
            seen_rows,
            seen_labels,
            unseen_rows,
        })
    }

    fn batch<'a>(&'a self, d: ArrayView2<'a, f64>) -> Result<Batch<'a>> {
        Batch::new(
            d,
            self.seen_rows.clone(),
            self.seen_labels.clone(),
            self.unseen_rows.clone(),
            &self.split,
        )
    }
}

/// Weighted-sum objective `sum(w * y)` used to probe blocks with a non-scalar
/// output; its upstream gradient is `w`.
fn probe_weights(rng: &mut Rng64, rows: usize, cols: usize) -> Array2<f64> {
    uniform_matrix(rng, rows, cols, 1.0)
}

/// Runs every block check. Failures are reported, not returned as errors.
pub fn run_gradcheck_suite(cfg: &GradcheckConfig, seed: u64) -> Result<Vec<BlockCheck>> {
    cfg.validate()?;
    let rng = |tag: &str| seeded_rng(derive_seed(seed, tag, 0));
    let opts = cfg.options(derive_seed(seed, "gradcheck-entries", 0));
    let t = cfg.points;
    let mut out = Vec::new();
    let mut push = |block: &str, report: GradCheckReport| {
        out.push(BlockCheck {
            block: block.to_string(),
            report,
        })
    };

    // Backbone. Its input is data, so only parameter gradients exist.
    {
        let mut r = rng("backbone");
        let mut probe = Probe {
            block: Backbone::new(cfg.descriptor_dim, cfg.hidden_dim, cfg.feature_dim, &mut r),
            tensors: Vec::new(),
        };
        let x = uniform_matrix(&mut r, t, cfg.descriptor_dim, 1.0);
        let w = probe_weights(&mut r, t, cfg.feature_dim);
        let report = gradient_check(
            &mut probe,
            |p: &mut Probe<Backbone>| {
                let (y, cache) = p.block.forward(x.view()).unwrap();
                p.block.backward(&cache, w.view()).unwrap();
                (&y * &w).sum()
            },
            &opts,
        )?;
        push("backbone", report);
    }

    // Attention over the prototype bank (theta, phi, g).
    {
        let mut r = rng("attention");
        let mut probe = Probe {
            block: PrototypeBank::new(cfg.prototypes, cfg.feature_dim, cfg.attention_dim, 4.0, &mut r)?,
            tensors: vec![ParamTensor::new("features", uniform_matrix(&mut r, t, cfg.feature_dim, 1.0))],
        };
        let w = probe_weights(&mut r, t, cfg.prototypes);
        let report = gradient_check(
            &mut probe,
            |p: &mut Probe<PrototypeBank>| {
                let x = p.tensors[0].values().to_owned();
                let (vis, cache) = p.block.forward(x.view()).unwrap();
                let gx = p.block.backward(&cache, w.view()).unwrap();
                p.tensors[0].accumulate_grad(gx.view()).unwrap();
                (&vis.alpha * &w).sum()
            },
            &opts,
        )?;
        push("attention", report);
    }

    // Semantic generator.
    {
        let mut r = rng("generator");
        let embeddings = uniform_matrix(&mut r, cfg.classes, cfg.embedding_dim, 1.0);
        let mut probe = Probe {
            block: SemanticGenerator::new(cfg.embedding_dim, cfg.hidden_dim, cfg.prototypes, cfg.kernels, &mut r)?,
            tensors: Vec::new(),
        };
        let w = probe_weights(&mut r, cfg.classes, cfg.prototypes);
        let report = gradient_check(
            &mut probe,
            |p: &mut Probe<SemanticGenerator>| {
                let (bank, cache) = p.block.forward(embeddings.view()).unwrap();
                p.block.backward_aggregate(&cache, w.view()).unwrap();
                (&bank.aggregate * &w).sum()
            },
            &opts,
        )?;
        push("generator", report);
    }

    // Similarity, with respect to both operands.
    {
        let mut r = rng("similarity");
        let mut probe = Probe {
            block: (),
            tensors: vec![
                ParamTensor::new("visual", uniform_matrix(&mut r, t, cfg.prototypes, 1.0)),
                ParamTensor::new("aggregate", uniform_matrix(&mut r, cfg.classes, cfg.prototypes, 1.0)),
            ],
        };
        let w = probe_weights(&mut r, t, cfg.classes);
        let report = gradient_check(
            &mut probe,
            |p: &mut Probe<()>| {
                let vis = p.tensors[0].values().to_owned();
                let agg = p.tensors[1].values().to_owned();
                let d = vis.dot(&agg.t());
                let (gv, ga) = similarity_backward(vis.view(), agg.view(), w.view()).unwrap();
                p.tensors[0].accumulate_grad(gv.view()).unwrap();
                p.tensors[1].accumulate_grad(ga.view()).unwrap();
                (&d * &w).sum()
            },
            &opts,
        )?;
        push("similarity", report);
    }

    // Losses, with respect to the similarity matrix.
    let mut r = rng("losses");
    let micro = MicroBatch::random(cfg, &mut r)?;
    let logits = uniform_matrix(&mut r, t, cfg.classes, 2.0);
    // Scaled so most weak-view rows clear the confidence threshold.
    let weak = uniform_matrix(&mut r, t, cfg.classes, 8.0);
    let loss_cfg = LossConfig {
        tau: 0.7,
        tau_u: 0.5,
        ..LossConfig::default()
    };
    let check_loss = |f: &dyn Fn(&Batch<'_>) -> Result<LossTerm>| -> Result<GradCheckReport> {
        let mut probe = Probe {
            block: (),
            tensors: vec![ParamTensor::new("similarity", logits.clone())],
        };
        gradient_check(
            &mut probe,
            |p: &mut Probe<()>| {
                let d = p.tensors[0].values().to_owned();
                let term = f(&micro.batch(d.view()).unwrap()).unwrap();
                p.tensors[0].accumulate_grad(term.grad.view()).unwrap();
                term.value
            },
            &opts,
        )
    };
    push("loss_seen", check_loss(&|b| seen_loss(b, &loss_cfg))?);
    push("loss_unknown_aware", check_loss(&|b| unknown_aware_loss(b, &loss_cfg))?);
    push("loss_pseudo_label", check_loss(&|b| pseudo_label_loss(b, &loss_cfg))?);
    push(
        "loss_consistency",
        check_loss(&|b| consistency_loss(weak.view(), b, &loss_cfg))?,
    );
    for variant in Variant::ALL {
        let c = LossConfig {
            variant,
            ..loss_cfg.clone()
        };
        let report = check_loss(&|b| {
            let total = total_loss(b, &c, Some(weak.view()))?;
            Ok(LossTerm {
                value: total.value,
                grad: total.grad,
                warning: None,
            })
        })?;
        push(&format!("loss_total[{variant}]"), report);
    }

    // Whole model under the combined loss.
    for use_prototypes in [true, false] {
        let mut r = rng(if use_prototypes { "model-full" } else { "model-base" });
        let mc = cfg.model_config(use_prototypes);
        let embeddings = uniform_matrix(&mut r, cfg.classes, cfg.embedding_dim, 1.0);
        let mut model = SegmentationModel::new(mc, embeddings, r.random())?;
        let descriptors = uniform_matrix(&mut r, t, cfg.descriptor_dim, 1.0);
        let report = gradient_check(
            &mut model,
            |m: &mut SegmentationModel| {
                let (d, cache) = m.forward(descriptors.view()).unwrap();
                let total = total_loss(&micro.batch(d.view()).unwrap(), &loss_cfg, None).unwrap();
                m.backward(&cache, total.grad.view()).unwrap();
                total.value
            },
            &opts,
        )?;
        push(
            if use_prototypes { "end_to_end" } else { "end_to_end[base]" },
            report,
        );
    }
    Ok(out)
}
