//! Hand-crafted per-point geometry fed to the backbone.
//!
//! Layout of the 8 columns:
//!
//! | col | meaning                                                     |
//! |-----|-------------------------------------------------------------|
//! | 0   | height above the floor (`z`)                                |
//! | 1-3 | point minus the centroid of its neighbourhood               |
//! | 4-6 | covariance eigenvalues, descending, divided by their sum    |
//! | 7   | local density, `1 / mean neighbour distance` (capped)       |
//!
//! The neighbourhood is the point itself plus its `k` nearest neighbours.

use nalgebra::{Matrix3, SymmetricEigen};
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scenegen::Scene;

pub const DESCRIPTOR_DIM: usize = 8;
/// Upper bound on the density column, reached for duplicate points.
pub const DENSITY_CAP: f64 = 1e4;

/// Descriptors for every point of `scene`.
pub fn point_descriptor(scene: &Scene, k_neighbors: usize) -> Result<Array2<f64>> {
    let all: Vec<usize> = (0..scene.len()).collect();
    point_descriptor_at(scene, &all, k_neighbors)
}

/// Descriptors for the points `indices` of `scene`, with neighbours searched
/// over the whole scene.
pub fn point_descriptor_at(scene: &Scene, indices: &[usize], k_neighbors: usize) -> Result<Array2<f64>> {
    if k_neighbors < 3 {
        return Err(Error::Config(format!("k_neighbors must be >= 3, got {k_neighbors}")));
    }
    if scene.len() <= k_neighbors {
        return Err(Error::Config(format!(
            "scene has {} points, need more than k_neighbors = {k_neighbors}",
            scene.len()
        )));
    }
    let mut out = Array2::zeros((indices.len(), DESCRIPTOR_DIM));
    let mut dists: Vec<(f64, usize)> = Vec::with_capacity(scene.len());
    for (row, &i) in indices.iter().enumerate() {
        let p = scene.points[i];
        dists.clear();
        dists.extend(
            scene
                .points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, q)| (sq_dist(p, *q), j)),
        );
        dists.select_nth_unstable_by(k_neighbors - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let neighbors = &dists[..k_neighbors];

        let mut centroid = p;
        for &(_, j) in neighbors {
            for a in 0..3 {
                centroid[a] += scene.points[j][a];
            }
        }
        let n = (k_neighbors + 1) as f64;
        centroid = centroid.map(|v| v / n);

        let mut cov = Matrix3::zeros();
        for q in std::iter::once(p).chain(neighbors.iter().map(|&(_, j)| scene.points[j])) {
            let d = [q[0] - centroid[0], q[1] - centroid[1], q[2] - centroid[2]];
            for a in 0..3 {
                for b in 0..3 {
                    cov[(a, b)] += d[a] * d[b];
                }
            }
        }
        cov /= n;
        let eig = normalized_eigenvalues(cov);

        let mean_dist = neighbors.iter().map(|(d2, _)| d2.sqrt()).sum::<f64>() / k_neighbors as f64;
        let density = if mean_dist * DENSITY_CAP > 1.0 {
            1.0 / mean_dist
        } else {
            DENSITY_CAP
        };

        let mut r = out.row_mut(row);
        r[0] = p[2];
        for a in 0..3 {
            r[1 + a] = p[a] - centroid[a];
            r[4 + a] = eig[a];
        }
        r[7] = density;
    }
    Ok(out)
}

fn sq_dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// Eigenvalues of a symmetric positive semi-definite matrix, clamped at zero,
/// sorted descending and divided by their sum (all zero for a zero matrix).
pub fn normalized_eigenvalues(cov: Matrix3<f64>) -> [f64; 3] {
    let values = SymmetricEigen::new(cov).eigenvalues;
    let mut ev = [values[0].max(0.0), values[1].max(0.0), values[2].max(0.0)];
    ev.sort_by(|a, b| b.total_cmp(a));
    let sum: f64 = ev.iter().sum();
    if sum > 0.0 {
        ev.map(|v| v / sum)
    } else {
        [0.0; 3]
    }
}
