use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::numerics::{gaussian_matrix, softmax_rows, softmax_rows_backward, uniform_matrix, Affine, ParamTensor, Rng64};

/// Learnable geometric-primitive prototypes with key/query projections.
///
/// `alpha[t, m] = softmax_m( lambda * <key(x_t), query(g_m)> )`: every point
/// becomes a distribution over the `M` prototypes.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeBank {
    /// `M x F`.
    pub prototypes: ParamTensor,
    /// Applied to point features.
    pub key: Affine,
    /// Applied to prototypes; `F x A`, linear. A bias here would add the
    /// same constant to every logit of a row and cancel in the softmax.
    pub query: ParamTensor,
    /// Inverse temperature.
    pub lambda: f64,
}

/// Row-stochastic `T x M` matrix of prototype weights.
#[derive(Debug, Clone, PartialEq)]
pub struct VisualRepresentation {
    pub alpha: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct AttentionCache {
    features: Array2<f64>,
    keys: Array2<f64>,
    queries: Array2<f64>,
    alpha: Array2<f64>,
}

impl PrototypeBank {
    pub fn new(
        count: usize,
        feature_dim: usize,
        attention_dim: usize,
        lambda: f64,
        rng: &mut Rng64,
    ) -> Result<Self> {
        if count == 0 || attention_dim == 0 {
            return Err(Error::Config("prototype count and attention dim must be >= 1".into()));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        Ok(Self {
            prototypes: ParamTensor::new("prototypes.g", gaussian_matrix(rng, count, feature_dim, 0.1)),
            key: Affine::new("prototypes.key", feature_dim, attention_dim, rng),
            query: ParamTensor::new(
                "prototypes.query.weight",
                uniform_matrix(rng, feature_dim, attention_dim, 1.0 / (feature_dim as f64).sqrt()),
            ),
            lambda,
        })
    }

    pub fn count(&self) -> usize {
        self.prototypes.shape().0
    }

    pub fn feature_dim(&self) -> usize {
        self.prototypes.shape().1
    }

    pub fn forward(&self, features: ArrayView2<'_, f64>) -> Result<(VisualRepresentation, AttentionCache)> {
        if features.ncols() != self.feature_dim() {
            return Err(Error::shape("prototype attention input", ("T", self.feature_dim()), features.dim()));
        }
        let keys = self.key.forward(features)?;
        let queries = self.prototypes.values().dot(&self.query.values());
        let logits = keys.dot(&queries.t());
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite prototype attention logits".into()));
        }
        let alpha = softmax_rows(logits.view(), self.lambda);
        let cache = AttentionCache {
            features: features.to_owned(),
            keys,
            queries,
            alpha: alpha.clone(),
        };
        Ok((VisualRepresentation { alpha }, cache))
    }

    /// Accumulates gradients into prototypes, key and query; returns the
    /// gradient w.r.t. the input features.
    pub fn backward(&mut self, cache: &AttentionCache, grad_alpha: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let grad_logits = softmax_rows_backward(cache.alpha.view(), grad_alpha, self.lambda);
        let grad_keys = grad_logits.dot(&cache.queries);
        let grad_queries = grad_logits.t().dot(&cache.keys);
        let grad_query = self.prototypes.values().t().dot(&grad_queries);
        let grad_protos = grad_queries.dot(&self.query.values().t());
        self.query.accumulate_grad(grad_query.view())?;
        self.prototypes.accumulate_grad(grad_protos.view())?;
        self.key.backward(cache.features.view(), grad_keys.view())
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        let mut v = vec![&self.prototypes];
        v.extend(self.key.params());
        v.push(&self.query);
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut v = vec![&mut self.prototypes];
        v.extend(self.key.params_mut());
        v.push(&mut self.query);
        v
    }
}

/// [`PrototypeBank::forward`] without the cache.
pub fn visual_representation(features: ArrayView2<'_, f64>, bank: &PrototypeBank) -> Result<VisualRepresentation> {
    Ok(bank.forward(features)?.0)
}
