use rand::seq::index::sample;
use serde::Serialize;

use super::param::ParamContainer;
use super::rng::seeded_rng;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    /// Finite-difference half step `h`.
    pub step: f64,
    pub tolerance: f64,
    /// Tensors larger than this are checked on a random subsample of entries.
    pub max_entries_per_param: usize,
    /// Floor of the relative-error denominator.
    pub abs_floor: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-4,
            max_entries_per_param: 64,
            abs_floor: 1e-12,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub step: f64,
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }

    pub fn failures(&self) -> Vec<&ParamCheck> {
        self.params
            .iter()
            .filter(|p| !(p.max_rel_error <= self.tolerance))
            .collect()
    }
}

/// Compares the analytic gradient against central finite differences.
///
/// `loss_fn` must evaluate the loss *and* accumulate its gradient into the
/// container's parameters. It is called once with zeroed gradients to obtain
/// the analytic gradient, then twice per checked entry with a perturbed value
/// (gradients accumulated during those calls are discarded).
///
/// A tolerance violation is reported in the returned [`GradCheckReport`], not
/// as an error; errors are reserved for invalid options.
pub fn gradient_check<C, F>(
    container: &mut C,
    mut loss_fn: F,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport>
where
    C: ParamContainer + ?Sized,
    F: FnMut(&mut C) -> f64,
{
    if !(opts.step > 0.0) {
        return Err(Error::Config(format!("finite-difference step must be > 0, got {}", opts.step)));
    }
    container.zero_grads();
    loss_fn(container);
    let analytic: Vec<Vec<f64>> = container
        .params()
        .iter()
        .map(|p| p.grad().iter().copied().collect())
        .collect();
    let names: Vec<String> = container.params().iter().map(|p| p.name().to_string()).collect();

    let mut rng = seeded_rng(opts.seed);
    let mut params = Vec::with_capacity(names.len());
    for (pi, name) in names.into_iter().enumerate() {
        let len = analytic[pi].len();
        let indices: Vec<usize> = if len > opts.max_entries_per_param {
            let mut idx = sample(&mut rng, len, opts.max_entries_per_param).into_vec();
            idx.sort_unstable();
            idx
        } else {
            (0..len).collect()
        };

        let mut check = ParamCheck {
            name,
            checked: indices.len(),
            max_rel_error: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for &flat in &indices {
            let original = nth_value(container, pi, flat);
            set_value(container, pi, flat, original + opts.step);
            let plus = loss_fn(container);
            set_value(container, pi, flat, original - opts.step);
            let minus = loss_fn(container);
            set_value(container, pi, flat, original);

            let numeric = (plus - minus) / (2.0 * opts.step);
            let a = analytic[pi][flat];
            let denom = a.abs().max(numeric.abs()).max(opts.abs_floor);
            let rel = (a - numeric).abs() / denom;
            // NaN compares false, so route it through explicitly
            if rel > check.max_rel_error || rel.is_nan() {
                check.max_rel_error = if rel.is_nan() { f64::INFINITY } else { rel };
                check.worst_index = flat;
                check.analytic = a;
                check.numeric = numeric;
            }
        }
        params.push(check);
    }
    container.zero_grads();

    Ok(GradCheckReport {
        tolerance: opts.tolerance,
        step: opts.step,
        params,
    })
}

fn nth_value<C: ParamContainer + ?Sized>(c: &C, param: usize, flat: usize) -> f64 {
    let params = c.params();
    let values = params[param].values();
    let cols = values.ncols();
    values[[flat / cols, flat % cols]]
}

fn set_value<C: ParamContainer + ?Sized>(c: &mut C, param: usize, flat: usize, v: f64) {
    let mut params = c.params_mut();
    let mut values = params[param].values_mut();
    let cols = values.ncols();
    values[[flat / cols, flat % cols]] = v;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{ParamSet, ParamTensor};
    use ndarray::{array, Array2};

    fn set() -> ParamSet {
        ParamSet::new(vec![
            ParamTensor::new("a", array![[0.5, -1.5, 2.0]]),
            ParamTensor::new("b", array![[3.0], [-0.25]]),
        ])
    }

    #[test]
    fn linear_loss_has_zero_error() {
        let mut params = set();
        let report = gradient_check(
            &mut params,
            |ps: &mut ParamSet| {
                let mut total = 0.0;
                for p in ps.params_mut() {
                    total += p.values().sum();
                    let ones = Array2::ones(p.shape());
                    p.accumulate_grad(ones.view()).unwrap();
                }
                total
            },
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert!(report.passed());
        assert!(report.max_rel_error() < 1e-9);
    }

    #[test]
    fn quadratic_loss_matches_closely() {
        let mut params = set();
        let report = gradient_check(
            &mut params,
            |ps: &mut ParamSet| {
                let mut total = 0.0;
                for p in ps.params_mut() {
                    total += 0.5 * p.values().mapv(|v| v * v).sum();
                    let g = p.values().to_owned();
                    p.accumulate_grad(g.view()).unwrap();
                }
                total
            },
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert!(report.max_rel_error() < 1e-8, "{report:?}");
    }

    #[test]
    fn wrong_gradient_is_reported_not_panicking() {
        let mut params = set();
        let report = gradient_check(
            &mut params,
            |ps: &mut ParamSet| {
                let mut total = 0.0;
                for p in ps.params_mut() {
                    total += 0.5 * p.values().mapv(|v| v * v).sum();
                    // off by a factor of two
                    let g = p.values().mapv(|v| 2.0 * v);
                    p.accumulate_grad(g.view()).unwrap();
                }
                total
            },
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert!(!report.passed());
        assert_eq!(report.failures().len(), 2);
        assert!(params.params().iter().all(|p| p.grad().iter().all(|&g| g == 0.0)));
    }

    #[test]
    fn rejects_non_positive_step() {
        let mut params = set();
        let opts = GradCheckOptions {
            step: 0.0,
            ..Default::default()
        };
        assert!(gradient_check(&mut params, |_| 0.0, &opts).is_err());
    }
}
