use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::Result;
use crate::numerics::softmax_rows;
use crate::reprs::{point_descriptor, SegmentationModel};
use crate::scenegen::Scene;

/// Per-point decisions plus the all-class softmax of `D` for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub classes: Vec<usize>,
    pub scores: Array2<f64>,
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax_lowest(row: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Argmax over raw similarities. The softmax is monotone, so it is only
/// computed for the reported scores.
pub fn predict_from_similarity(d: ArrayView2<'_, f64>) -> Prediction {
    Prediction {
        classes: d.rows().into_iter().map(argmax_lowest).collect(),
        scores: softmax_rows(d, 1.0),
    }
}

/// Runs the model on every point of `scene`.
pub fn infer_scene(scene: &Scene, model: &SegmentationModel, k_neighbors: usize) -> Result<Prediction> {
    let descriptors = point_descriptor(scene, k_neighbors)?;
    let (d, _) = model.forward(descriptors.view())?;
    Ok(predict_from_similarity(d.view()))
}
