use ndarray::{Array2, ArrayView2, ArrayViewMut2};

use crate::error::{Error, Result};

/// A named learnable matrix together with its gradient accumulator.
///
/// Vectors (biases) are stored as `1 x n` matrices. The value and gradient
/// arrays are only exposed through views so their shapes can never diverge.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor {
    name: String,
    values: Array2<f64>,
    grad: Array2<f64>,
}

impl ParamTensor {
    pub fn new(name: impl Into<String>, values: Array2<f64>) -> Self {
        let grad = Array2::zeros(values.raw_dim());
        Self {
            name: name.into(),
            values,
            grad,
        }
    }

    pub fn zeros(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Self::new(name, Array2::zeros((rows, cols)))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn values_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        self.values.view_mut()
    }

    pub fn grad(&self) -> ArrayView2<'_, f64> {
        self.grad.view()
    }

    pub fn grad_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        self.grad.view_mut()
    }

    /// Mutable access to values and gradient at once (used by the optimizer).
    pub fn split_mut(&mut self) -> (ArrayViewMut2<'_, f64>, ArrayView2<'_, f64>) {
        (self.values.view_mut(), self.grad.view())
    }

    /// Replaces the values, which must keep the current shape.
    pub fn set_values(&mut self, values: Array2<f64>) -> Result<()> {
        if values.dim() != self.values.dim() {
            return Err(Error::shape(
                format!("tensor '{}'", self.name),
                self.values.dim(),
                values.dim(),
            ));
        }
        self.values = values;
        Ok(())
    }

    pub fn accumulate_grad(&mut self, delta: ArrayView2<'_, f64>) -> Result<()> {
        if delta.dim() != self.grad.dim() {
            return Err(Error::shape(
                format!("gradient of '{}'", self.name),
                self.grad.dim(),
                delta.dim(),
            ));
        }
        self.grad += &delta;
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Anything that owns a fixed, ordered collection of parameters.
pub trait ParamContainer {
    fn params(&self) -> Vec<&ParamTensor>;
    fn params_mut(&mut self) -> Vec<&mut ParamTensor>;

    fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

/// A plain list of tensors, handy for tests and ad-hoc objectives.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    pub tensors: Vec<ParamTensor>,
}

impl ParamSet {
    pub fn new(tensors: Vec<ParamTensor>) -> Self {
        Self { tensors }
    }

    pub fn get(&self, name: &str) -> Option<&ParamTensor> {
        self.tensors.iter().find(|t| t.name() == name)
    }
}

impl ParamContainer for ParamSet {
    fn params(&self) -> Vec<&ParamTensor> {
        self.tensors.iter().collect()
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.tensors.iter_mut().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_grad_clears_accumulator() {
        let mut p = ParamTensor::new("w", array![[1.0, 2.0]]);
        p.accumulate_grad(array![[0.5, -3.0]].view()).unwrap();
        assert_eq!(p.grad()[[0, 1]], -3.0);
        p.zero_grad();
        assert!(p.grad().iter().all(|&g| g == 0.0));
        assert_eq!(p.grad().dim(), p.values().dim());
    }

    #[test]
    fn set_values_rejects_reshape() {
        let mut p = ParamTensor::zeros("b", 1, 3);
        assert!(p.set_values(Array2::zeros((3, 1))).is_err());
    }
}
