use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};

use crate::error::{Error, Result};

/// `exp(scale * x_m) / sum_m' exp(scale * x_m')`, computed after subtracting
/// the maximum scaled logit.
pub fn scaled_softmax(logits: ArrayView1<'_, f64>, scale: f64) -> Result<Array1<f64>> {
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(Error::Numeric(format!("softmax scale must be finite and >= 0, got {scale}")));
    }
    if let Some(bad) = logits.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("non-finite softmax logit {bad}")));
    }
    let mut out = logits.mapv(|v| v * scale);
    normalize_exp(out.view_mut());
    Ok(out)
}

/// Vector-Jacobian product of [`scaled_softmax`] w.r.t. the unscaled logits.
pub fn scaled_softmax_backward(
    output: ArrayView1<'_, f64>,
    grad_out: ArrayView1<'_, f64>,
    scale: f64,
) -> Array1<f64> {
    let inner = output.dot(&grad_out);
    Zip::from(output)
        .and(grad_out)
        .map_collect(|&p, &g| scale * p * (g - inner))
}

fn normalize_exp(mut row: ndarray::ArrayViewMut1<'_, f64>) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    row.mapv_inplace(|v| (v - max).exp());
    let sum = row.sum();
    row.mapv_inplace(|v| v / sum);
}

/// Row-wise [`scaled_softmax`]. Assumes finite input; callers validate.
pub fn softmax_rows(logits: ArrayView2<'_, f64>, scale: f64) -> Array2<f64> {
    let mut out = logits.mapv(|v| v * scale);
    for row in out.axis_iter_mut(Axis(0)) {
        normalize_exp(row);
    }
    out
}

/// Row-wise [`scaled_softmax_backward`].
pub fn softmax_rows_backward(
    output: ArrayView2<'_, f64>,
    grad_out: ArrayView2<'_, f64>,
    scale: f64,
) -> Array2<f64> {
    let mut grad = Array2::zeros(output.raw_dim());
    Zip::from(grad.rows_mut())
        .and(output.rows())
        .and(grad_out.rows())
        .for_each(|mut g, p, go| {
            let inner = p.dot(&go);
            Zip::from(&mut g)
                .and(p)
                .and(go)
                .for_each(|g, &p, &go| *g = scale * p * (go - inner));
        });
    grad
}

/// Row-wise `log softmax(scale * logits)`.
pub fn log_softmax_rows(logits: ArrayView2<'_, f64>, scale: f64) -> Array2<f64> {
    let mut out = logits.mapv(|v| v * scale);
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn zero_scale_is_uniform() {
        let out = scaled_softmax(array![3.0, -1.0, 7.5, 0.0].view(), 0.0).unwrap();
        for v in out.iter() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_logits_are_uniform() {
        let out = scaled_softmax(array![2.5, 2.5, 2.5].view(), 11.0).unwrap();
        for v in out.iter() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn two_logits_match_logistic() {
        let out = scaled_softmax(array![1.0, 0.0].view(), 4.0).unwrap();
        let sigma = 1.0 / (1.0 + (-4.0f64).exp());
        assert!((out[0] - sigma).abs() < 1e-15);
        assert!((out[1] - (1.0 - sigma)).abs() < 1e-15);
        assert!(((-4.0f64).exp() - 0.0183156).abs() < 1e-7);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(scaled_softmax(array![1.0, f64::NAN].view(), 1.0).is_err());
        assert!(scaled_softmax(array![1.0, f64::INFINITY].view(), 1.0).is_err());
        assert!(scaled_softmax(array![1.0, 2.0].view(), -1.0).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let logits = array![0.3, -1.2, 2.0, 0.7];
        let weights = array![0.5, -2.0, 1.0, 3.0];
        let scale = 2.5;
        let f = |x: &Array1<f64>| scaled_softmax(x.view(), scale).unwrap().dot(&weights);
        let out = scaled_softmax(logits.view(), scale).unwrap();
        let grad = scaled_softmax_backward(out.view(), weights.view(), scale);
        let h = 1e-6;
        for i in 0..logits.len() {
            let mut plus = logits.clone();
            plus[i] += h;
            let mut minus = logits.clone();
            minus[i] -= h;
            let numeric = (f(&plus) - f(&minus)) / (2.0 * h);
            assert!((numeric - grad[i]).abs() < 1e-8, "{numeric} vs {}", grad[i]);
        }
    }

    #[test]
    fn row_versions_agree_with_vector_version() {
        let m = array![[0.1, 2.0, -3.0], [5.0, 5.0, 4.0]];
        let rows = softmax_rows(m.view(), 1.7);
        let logs = log_softmax_rows(m.view(), 1.7);
        for r in 0..2 {
            let v = scaled_softmax(m.row(r), 1.7).unwrap();
            for c in 0..3 {
                assert!((rows[[r, c]] - v[c]).abs() < 1e-15);
                assert!((logs[[r, c]] - v[c].ln()).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn output_is_a_distribution(
            // scaled spread stays below ~700, where exp() still has a positive result
            logits in prop::collection::vec(-30.0f64..30.0, 1..20),
            scale in 0.0f64..10.0,
        ) {
            let out = scaled_softmax(Array1::from(logits).view(), scale).unwrap();
            prop_assert!(out.iter().all(|&p| p > 0.0));
            prop_assert!((out.sum() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn shift_invariant(
            logits in prop::collection::vec(-20.0f64..20.0, 1..12),
            shift in -100.0f64..100.0,
            scale in 0.0f64..5.0,
        ) {
            let base = Array1::from(logits);
            let shifted = base.mapv(|v| v + shift);
            let a = scaled_softmax(base.view(), scale).unwrap();
            let b = scaled_softmax(shifted.view(), scale).unwrap();
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
