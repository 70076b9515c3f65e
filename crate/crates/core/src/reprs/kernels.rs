use ndarray::{Array2, Array3, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::numerics::{uniform_matrix, Affine, ParamTensor, Rng64};

/// Generator `G`: one two-layer network `E -> H -> V*K` whose output is
/// split into `K` kernels of dimension `V` per class. The output layer has
/// no bias: a class-independent offset shifts every logit of a point
/// equally and so never reaches a loss or a prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticGenerator {
    pub hidden: Affine,
    pub output: ParamTensor,
    kernel_count: usize,
    repr_dim: usize,
}

/// Per-class kernels and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticKernelBank {
    /// `C x K x V`.
    pub kernels: Array3<f64>,
    /// `C x V`, the sum of each class's kernels.
    pub aggregate: Array2<f64>,
}

impl SemanticKernelBank {
    pub fn from_kernels(kernels: Array3<f64>) -> Self {
        let aggregate = kernels.sum_axis(Axis(1));
        Self { kernels, aggregate }
    }

    pub fn class_count(&self) -> usize {
        self.kernels.dim().0
    }

    pub fn kernel_count(&self) -> usize {
        self.kernels.dim().1
    }

    pub fn repr_dim(&self) -> usize {
        self.kernels.dim().2
    }
}

#[derive(Debug, Clone)]
pub struct GeneratorCache {
    input: Array2<f64>,
    activation: Array2<f64>,
}

impl SemanticGenerator {
    pub fn new(
        embedding_dim: usize,
        hidden_dim: usize,
        repr_dim: usize,
        kernel_count: usize,
        rng: &mut Rng64,
    ) -> Result<Self> {
        if kernel_count == 0 || repr_dim == 0 {
            return Err(Error::Config("kernel count and representation dim must be >= 1".into()));
        }
        Ok(Self {
            hidden: Affine::new("generator.hidden", embedding_dim, hidden_dim, rng),
            output: ParamTensor::new(
                "generator.output.weight",
                uniform_matrix(rng, hidden_dim, repr_dim * kernel_count, 1.0 / (hidden_dim as f64).sqrt()),
            ),
            kernel_count,
            repr_dim,
        })
    }

    pub fn kernel_count(&self) -> usize {
        self.kernel_count
    }

    pub fn repr_dim(&self) -> usize {
        self.repr_dim
    }

    pub fn embedding_dim(&self) -> usize {
        self.hidden.d_in()
    }

    pub fn forward(&self, embeddings: ArrayView2<'_, f64>) -> Result<(SemanticKernelBank, GeneratorCache)> {
        if embeddings.ncols() != self.embedding_dim() {
            return Err(Error::shape(
                "generator input (embedding dim)",
                ("C", self.embedding_dim()),
                embeddings.dim(),
            ));
        }
        let activation = self.hidden.forward(embeddings)?.mapv(f64::tanh);
        let flat = activation.dot(&self.output.values());
        let classes = embeddings.nrows();
        let kernels = flat
            .into_shape_with_order((classes, self.kernel_count, self.repr_dim))
            .map_err(|e| Error::Numeric(format!("reshaping kernels: {e}")))?;
        let cache = GeneratorCache {
            input: embeddings.to_owned(),
            activation,
        };
        Ok((SemanticKernelBank::from_kernels(kernels), cache))
    }

    /// Backward from a gradient on the aggregate (`C x V`). Each kernel
    /// receives the aggregate gradient unchanged.
    pub fn backward_aggregate(&mut self, cache: &GeneratorCache, grad_aggregate: ArrayView2<'_, f64>) -> Result<()> {
        let (classes, v) = grad_aggregate.dim();
        if v != self.repr_dim || classes != cache.input.nrows() {
            return Err(Error::shape("aggregate gradient", (cache.input.nrows(), self.repr_dim), (classes, v)));
        }
        let mut grad_flat = Array2::zeros((classes, self.kernel_count * self.repr_dim));
        for k in 0..self.kernel_count {
            grad_flat
                .slice_mut(ndarray::s![.., k * v..(k + 1) * v])
                .assign(&grad_aggregate);
        }
        self.output.accumulate_grad(cache.activation.t().dot(&grad_flat).view())?;
        let grad_act = grad_flat.dot(&self.output.values().t());
        let grad_pre = grad_act * cache.activation.mapv(|a| 1.0 - a * a);
        self.hidden.backward(cache.input.view(), grad_pre.view())?;
        Ok(())
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        let mut v = self.hidden.params().to_vec();
        v.push(&self.output);
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut v: Vec<&mut ParamTensor> = self.hidden.params_mut().into_iter().collect();
        v.push(&mut self.output);
        v
    }
}

/// Runs the generator on every class embedding.
pub fn semantic_kernels(embeddings: ArrayView2<'_, f64>, generator: &SemanticGenerator) -> Result<SemanticKernelBank> {
    Ok(generator.forward(embeddings)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{gradient_check, seeded_rng, uniform_matrix, GradCheckOptions, ParamContainer};

    #[test]
    fn single_kernel_aggregate_is_the_kernel() {
        let mut rng = seeded_rng(1);
        let g = SemanticGenerator::new(6, 5, 4, 1, &mut rng).unwrap();
        let e = uniform_matrix(&mut rng, 3, 6, 1.0);
        let bank = semantic_kernels(e.view(), &g).unwrap();
        assert_eq!(bank.aggregate, bank.kernels.index_axis(Axis(1), 0));
    }

    #[test]
    fn constant_generator_shares_kernels() {
        let mut rng = seeded_rng(2);
        let mut g = SemanticGenerator::new(6, 5, 3, 2, &mut rng).unwrap();
        g.hidden.weight.set_values(Array2::zeros((6, 5))).unwrap();
        let e = uniform_matrix(&mut rng, 4, 6, 1.0);
        let bank = semantic_kernels(e.view(), &g).unwrap();
        let act = g.hidden.bias.values().mapv(f64::tanh);
        let w = g.output.values();
        for c in 0..4 {
            for k in 0..2 {
                for v in 0..3 {
                    let expected: f64 = (0..5).map(|h| act[[0, h]] * w[[h, k * 3 + v]]).sum();
                    assert!((bank.kernels[[c, k, v]] - expected).abs() < 1e-15);
                    assert_eq!(bank.kernels[[c, k, v]], bank.kernels[[0, k, v]]);
                }
            }
        }
    }

    #[test]
    fn aggregate_equals_independent_sum() {
        let mut rng = seeded_rng(3);
        let g = SemanticGenerator::new(10, 8, 6, 5, &mut rng).unwrap();
        let e = uniform_matrix(&mut rng, 4, 10, 1.0);
        let bank = semantic_kernels(e.view(), &g).unwrap();
        let mut worst: f64 = 0.0;
        for c in 0..4 {
            for v in 0..6 {
                let mut s = 0.0;
                for k in 0..5 {
                    s += bank.kernels[[c, k, v]];
                }
                worst = worst.max((s - bank.aggregate[[c, v]]).abs());
            }
        }
        assert!(worst < 1e-12);
    }

    #[test]
    fn wrong_embedding_dim_rejected() {
        let mut rng = seeded_rng(4);
        let g = SemanticGenerator::new(10, 8, 6, 5, &mut rng).unwrap();
        assert!(semantic_kernels(Array2::zeros((3, 9)).view(), &g).is_err());
    }

    struct Probe {
        g: SemanticGenerator,
        e: Array2<f64>,
        w: Array2<f64>,
    }

    impl ParamContainer for Probe {
        fn params(&self) -> Vec<&ParamTensor> {
            self.g.params()
        }
        fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
            self.g.params_mut()
        }
    }

    #[test]
    fn gradient_check_passes() {
        let mut rng = seeded_rng(5);
        let mut probe = Probe {
            g: SemanticGenerator::new(7, 6, 4, 3, &mut rng).unwrap(),
            e: uniform_matrix(&mut rng, 5, 7, 1.0),
            w: uniform_matrix(&mut rng, 5, 4, 1.0),
        };
        let report = gradient_check(
            &mut probe,
            |p: &mut Probe| {
                let (bank, cache) = p.g.forward(p.e.view()).unwrap();
                let loss = (&bank.aggregate * &p.w).sum();
                p.g.backward_aggregate(&cache, p.w.view()).unwrap();
                loss
            },
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert!(report.passed(), "{report:#?}");
    }
}
