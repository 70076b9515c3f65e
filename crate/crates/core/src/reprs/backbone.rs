use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::numerics::{Affine, ParamTensor, Rng64};

/// Per-point two-layer perceptron: `tanh(x W1 + b1) W2 + b2`.
///
/// Inputs are first standardized with fixed (non-learnable) statistics
/// computed from training descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct Backbone {
    pub input_shift: Array1<f64>,
    pub input_scale: Array1<f64>,
    pub hidden: Affine,
    pub output: Affine,
}

#[derive(Debug, Clone)]
pub struct BackboneCache {
    input: Array2<f64>,
    activation: Array2<f64>,
}

impl Backbone {
    pub fn new(input_dim: usize, hidden_dim: usize, feature_dim: usize, rng: &mut Rng64) -> Self {
        Self {
            input_shift: Array1::zeros(input_dim),
            input_scale: Array1::ones(input_dim),
            hidden: Affine::new("backbone.hidden", input_dim, hidden_dim, rng),
            output: Affine::new("backbone.output", hidden_dim, feature_dim, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.hidden.d_in()
    }

    pub fn feature_dim(&self) -> usize {
        self.output.d_out()
    }

    /// Sets the standardization to the column mean and standard deviation of
    /// `samples` (columns with zero spread keep scale 1).
    pub fn fit_normalization(&mut self, samples: ArrayView2<'_, f64>) -> Result<()> {
        if samples.ncols() != self.input_dim() || samples.nrows() == 0 {
            return Err(Error::shape("normalization samples", ("N>0", self.input_dim()), samples.dim()));
        }
        let mean = samples.mean_axis(Axis(0)).unwrap();
        let std = samples.std_axis(Axis(0), 0.0);
        self.input_shift = mean;
        self.input_scale = std.mapv(|s| if s > 1e-12 { 1.0 / s } else { 1.0 });
        Ok(())
    }

    pub fn standardize(&self, input: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if input.ncols() != self.input_dim() {
            return Err(Error::shape("backbone input", ("N", self.input_dim()), input.dim()));
        }
        Ok((&input - &self.input_shift) * &self.input_scale)
    }

    pub fn forward(&self, descriptors: ArrayView2<'_, f64>) -> Result<(Array2<f64>, BackboneCache)> {
        let input = self.standardize(descriptors)?;
        let activation = self.hidden.forward(input.view())?.mapv(f64::tanh);
        let features = self.output.forward(activation.view())?;
        Ok((features, BackboneCache { input, activation }))
    }

    /// Accumulates parameter gradients from `grad_features`.
    pub fn backward(&mut self, cache: &BackboneCache, grad_features: ArrayView2<'_, f64>) -> Result<()> {
        let grad_act = self.output.backward(cache.activation.view(), grad_features)?;
        let grad_pre = grad_act * cache.activation.mapv(|a| 1.0 - a * a);
        self.hidden.backward(cache.input.view(), grad_pre.view())?;
        Ok(())
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        let mut v = self.hidden.params().to_vec();
        v.extend(self.output.params());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut v: Vec<&mut ParamTensor> = self.hidden.params_mut().into_iter().collect();
        v.extend(self.output.params_mut());
        v
    }
}

/// [`Backbone::forward`] without the cache.
pub fn extract_features(descriptors: ArrayView2<'_, f64>, backbone: &Backbone) -> Result<Array2<f64>> {
    Ok(backbone.forward(descriptors)?.0)
}
