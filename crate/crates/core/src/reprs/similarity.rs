use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

use super::kernels::SemanticKernelBank;

/// `D[t, c] = sum_k <vis_t, kernel_{c,k}> = <vis_t, aggregate_c>`.
pub fn similarity(vis: ArrayView2<'_, f64>, bank: &SemanticKernelBank) -> Result<Array2<f64>> {
    check_dims(vis, bank)?;
    Ok(vis.dot(&bank.aggregate.t()))
}

/// Same matrix computed kernel by kernel, without the aggregate.
pub fn similarity_per_kernel(vis: ArrayView2<'_, f64>, bank: &SemanticKernelBank) -> Result<Array2<f64>> {
    check_dims(vis, bank)?;
    let mut out = Array2::zeros((vis.nrows(), bank.class_count()));
    for k in 0..bank.kernel_count() {
        let kernel = bank.kernels.index_axis(Axis(1), k);
        out += &vis.dot(&kernel.t());
    }
    Ok(out)
}

/// Returns `(dL/dvis, dL/daggregate)` for an upstream gradient `dL/dD`.
pub fn similarity_backward(
    vis: ArrayView2<'_, f64>,
    aggregate: ArrayView2<'_, f64>,
    grad_d: ArrayView2<'_, f64>,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if grad_d.dim() != (vis.nrows(), aggregate.nrows()) {
        return Err(Error::shape("similarity gradient", (vis.nrows(), aggregate.nrows()), grad_d.dim()));
    }
    Ok((grad_d.dot(&aggregate), grad_d.t().dot(&vis)))
}

fn check_dims(vis: ArrayView2<'_, f64>, bank: &SemanticKernelBank) -> Result<()> {
    if vis.ncols() != bank.repr_dim() {
        return Err(Error::shape("similarity (representation dim)", ("T", bank.repr_dim()), vis.dim()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{seeded_rng, uniform_matrix};
    use ndarray::{array, Array3};

    fn random_bank(c: usize, k: usize, v: usize, seed: u64) -> SemanticKernelBank {
        let flat = uniform_matrix(&mut seeded_rng(seed), c, k * v, 1.0);
        SemanticKernelBank::from_kernels(flat.into_shape_with_order((c, k, v)).unwrap())
    }

    #[test]
    fn single_kernel_is_plain_dot() {
        let bank = random_bank(3, 1, 4, 1);
        let vis = uniform_matrix(&mut seeded_rng(2), 5, 4, 1.0);
        let d = similarity(vis.view(), &bank).unwrap();
        let k = bank.kernels.index_axis(Axis(1), 0);
        for t in 0..5 {
            for c in 0..3 {
                let dot: f64 = (0..4).map(|m| vis[[t, m]] * k[[c, m]]).sum();
                assert!((d[[t, c]] - dot).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn kernel_sum_matches_aggregate_route() {
        let bank = random_bank(4, 6, 5, 3);
        let vis = uniform_matrix(&mut seeded_rng(4), 9, 5, 1.0);
        let a = similarity(vis.view(), &bank).unwrap();
        let b = similarity_per_kernel(vis.view(), &bank).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn hand_computed_two_by_two() {
        // kernels[c][k] over M = 2
        let kernels = Array3::from_shape_vec(
            (2, 2, 2),
            vec![1.0, 0.0, 0.5, 2.0, -1.0, 3.0, 0.0, 1.0],
        )
        .unwrap();
        let bank = SemanticKernelBank::from_kernels(kernels);
        let vis = array![[0.25, 0.75], [0.6, 0.4]];
        // class 0 aggregate [1.5, 2.0], class 1 aggregate [-1.0, 4.0]
        let expected = array![[0.375 + 1.5, -0.25 + 3.0], [0.9 + 0.8, -0.6 + 1.6]];
        let d = similarity(vis.view(), &bank).unwrap();
        for (x, y) in d.iter().zip(expected.iter()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn linear_in_visual_representation() {
        let bank = random_bank(3, 4, 6, 5);
        let mut rng = seeded_rng(6);
        let x1 = uniform_matrix(&mut rng, 4, 6, 1.0);
        let x2 = uniform_matrix(&mut rng, 4, 6, 1.0);
        let (a, b) = (0.3, -1.7);
        let lhs = similarity((&x1 * a + &x2 * b).view(), &bank).unwrap();
        let rhs = similarity(x1.view(), &bank).unwrap() * a + similarity(x2.view(), &bank).unwrap() * b;
        for (x, y) in lhs.iter().zip(rhs.iter()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let bank = random_bank(3, 2, 6, 7);
        assert!(similarity(Array2::zeros((2, 5)).view(), &bank).is_err());
    }

    #[test]
    fn backward_matches_definition() {
        let mut rng = seeded_rng(8);
        let vis = uniform_matrix(&mut rng, 3, 4, 1.0);
        let agg = uniform_matrix(&mut rng, 2, 4, 1.0);
        let g = uniform_matrix(&mut rng, 3, 2, 1.0);
        let (gv, ga) = similarity_backward(vis.view(), agg.view(), g.view()).unwrap();
        for t in 0..3 {
            for m in 0..4 {
                let e: f64 = (0..2).map(|c| g[[t, c]] * agg[[c, m]]).sum();
                assert!((gv[[t, m]] - e).abs() < 1e-15);
            }
        }
        for c in 0..2 {
            for m in 0..4 {
                let e: f64 = (0..3).map(|t| g[[t, c]] * vis[[t, m]]).sum();
                assert!((ga[[c, m]] - e).abs() < 1e-15);
            }
        }
    }
}
