use ndarray::{Array2, ArrayView2, Axis};

use super::param::ParamTensor;
use super::rng::{uniform_matrix, Rng64};
use crate::error::{Error, Result};

/// `output[n] = input[n] . weights + bias`.
pub fn affine_forward(
    input: ArrayView2<'_, f64>,
    weights: &ParamTensor,
    bias: &ParamTensor,
) -> Result<Array2<f64>> {
    check_shapes(input, weights, bias)?;
    let mut out = input.dot(&weights.values());
    out += &bias.values();
    Ok(out)
}

/// Accumulates weight and bias gradients, returns the gradient w.r.t. `input`.
pub fn affine_backward(
    input: ArrayView2<'_, f64>,
    weights: &mut ParamTensor,
    bias: &mut ParamTensor,
    grad_out: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    check_shapes(input, weights, bias)?;
    let expected = (input.nrows(), weights.shape().1);
    if grad_out.dim() != expected {
        return Err(Error::shape("affine output gradient", expected, grad_out.dim()));
    }
    weights.accumulate_grad(input.t().dot(&grad_out).view())?;
    bias.accumulate_grad(grad_out.sum_axis(Axis(0)).insert_axis(Axis(0)).view())?;
    Ok(grad_out.dot(&weights.values().t()))
}

fn check_shapes(input: ArrayView2<'_, f64>, weights: &ParamTensor, bias: &ParamTensor) -> Result<()> {
    let (d_in, d_out) = weights.shape();
    if input.ncols() != d_in {
        return Err(Error::shape(
            format!("affine input for '{}'", weights.name()),
            ("N", d_in),
            input.dim(),
        ));
    }
    if bias.shape() != (1, d_out) {
        return Err(Error::shape(
            format!("affine bias '{}'", bias.name()),
            (1, d_out),
            bias.shape(),
        ));
    }
    Ok(())
}

/// A single affine layer owning its weight and bias tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub weight: ParamTensor,
    pub bias: ParamTensor,
}

impl Affine {
    /// Uniform init in `[-1/sqrt(d_in), 1/sqrt(d_in)]` for weights and bias.
    pub fn new(name: &str, d_in: usize, d_out: usize, rng: &mut Rng64) -> Self {
        let bound = 1.0 / (d_in.max(1) as f64).sqrt();
        Self {
            weight: ParamTensor::new(format!("{name}.weight"), uniform_matrix(rng, d_in, d_out, bound)),
            bias: ParamTensor::new(format!("{name}.bias"), uniform_matrix(rng, 1, d_out, bound)),
        }
    }

    pub fn d_in(&self) -> usize {
        self.weight.shape().0
    }

    pub fn d_out(&self) -> usize {
        self.weight.shape().1
    }

    pub fn forward(&self, input: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        affine_forward(input, &self.weight, &self.bias)
    }

    pub fn backward(
        &mut self,
        input: ArrayView2<'_, f64>,
        grad_out: ArrayView2<'_, f64>,
    ) -> Result<Array2<f64>> {
        affine_backward(input, &mut self.weight, &mut self.bias, grad_out)
    }

    pub fn params(&self) -> [&ParamTensor; 2] {
        [&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut ParamTensor; 2] {
        [&mut self.weight, &mut self.bias]
    }
}
