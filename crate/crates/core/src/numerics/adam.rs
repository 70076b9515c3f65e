use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::param::ParamTensor;
use super::Precision;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moments are allocated lazily on the first
/// update and matched to parameters by position.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub precision: Precision,
    step_count: u64,
    first_moment: Vec<Array2<f64>>,
    second_moment: Vec<Array2<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            precision: Precision::Double,
            step_count: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Applies one update using the gradients currently stored in `params`.
    /// Gradients are left untouched; the caller zeroes them.
    pub fn update(&mut self, params: &mut [&mut ParamTensor]) -> Result<()> {
        for p in params.iter() {
            if let Some(g) = p.grad().iter().find(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite gradient {g} in parameter '{}'",
                    p.name()
                )));
            }
        }
        if self.first_moment.is_empty() {
            self.first_moment = params.iter().map(|p| Array2::zeros(p.shape())).collect();
            self.second_moment = self.first_moment.clone();
        }
        if self.first_moment.len() != params.len() {
            return Err(Error::Config(format!(
                "optimizer tracks {} tensors but received {}",
                self.first_moment.len(),
                params.len()
            )));
        }

        self.step_count += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step_count as i32;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);
        let single = self.precision == Precision::Single;

        for ((p, m), v) in params
            .iter_mut()
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            if m.dim() != p.shape() {
                return Err(Error::shape(
                    format!("optimizer state for '{}'", p.name()),
                    m.dim(),
                    p.shape(),
                ));
            }
            let (values, grad) = p.split_mut();
            Zip::from(values)
                .and(grad)
                .and(m)
                .and(v)
                .for_each(|x, &g, m, v| {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / bias1;
                    let v_hat = *v / bias2;
                    *x -= lr * m_hat / (v_hat.sqrt() + eps);
                    if single {
                        *x = *x as f32 as f64;
                    }
                });
            if !p.all_finite() {
                return Err(Error::Numeric(format!(
                    "parameter '{}' became non-finite at step {}",
                    p.name(),
                    self.step_count
                )));
            }
        }
        Ok(())
    }
}
