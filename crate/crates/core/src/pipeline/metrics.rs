use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenegen::SplitSpec;

/// Harmonic mean `2ab / (a + b)`, defined as 0 when `a + b = 0`.
pub fn hiou(seen: f64, unseen: f64) -> f64 {
    if seen + unseen == 0.0 {
        0.0
    } else {
        2.0 * seen * unseen / (seen + unseen)
    }
}

/// Segmentation quality. IoU values are fractions in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// IoU per class; classes listed in `absent` carry 0 and are excluded
    /// from every mean.
    pub per_class_iou: Vec<f64>,
    /// Classes that appear neither in the prediction nor in the ground truth.
    pub absent: Vec<usize>,
    pub miou_seen: f64,
    pub miou_unseen: f64,
    pub miou_all: f64,
    pub hiou: f64,
    pub accuracy: f64,
    /// `confusion[truth][prediction]` point counts.
    pub confusion: Vec<Vec<u64>>,
}

impl MetricsReport {
    /// Rebuilds the report from a confusion matrix alone.
    pub fn from_confusion(confusion: Vec<Vec<u64>>, split: &SplitSpec) -> Result<Self> {
        let c = confusion.len();
        if c != split.class_count() || confusion.iter().any(|r| r.len() != c) {
            return Err(Error::shape("confusion matrix", (split.class_count(), split.class_count()), c));
        }
        let mut per_class_iou = vec![0.0; c];
        let mut absent = Vec::new();
        let total: u64 = confusion.iter().flatten().sum();
        let mut correct = 0;
        for k in 0..c {
            let tp = confusion[k][k];
            let fn_: u64 = confusion[k].iter().sum::<u64>() - tp;
            let fp: u64 = (0..c).map(|r| confusion[r][k]).sum::<u64>() - tp;
            correct += tp;
            if tp + fp + fn_ == 0 {
                absent.push(k);
            } else {
                per_class_iou[k] = tp as f64 / (tp + fp + fn_) as f64;
            }
        }
        let mean_over = |pick: &dyn Fn(usize) -> bool| {
            let vals: Vec<f64> = (0..c)
                .filter(|&k| pick(k) && !absent.contains(&k))
                .map(|k| per_class_iou[k])
                .collect();
            if vals.is_empty() {
                0.0
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            }
        };
        let miou_seen = mean_over(&|k| split.is_seen(k));
        let miou_unseen = mean_over(&|k| split.is_unseen(k));
        let miou_all = mean_over(&|_| true);
        Ok(Self {
            per_class_iou,
            absent,
            miou_seen,
            miou_unseen,
            miou_all,
            hiou: hiou(miou_seen, miou_unseen),
            accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
            confusion,
        })
    }

    /// Aligned per-class table followed by the summary line.
    pub fn to_table(&self, class_names: &[String], split: &SplitSpec) -> String {
        let width = class_names.iter().map(|n| n.len()).max().unwrap_or(5).max(5);
        let mut out = format!("{:<width$}  {:<6}  {:>7}\n", "class", "split", "IoU %");
        for (k, iou) in self.per_class_iou.iter().enumerate() {
            let name = class_names.get(k).map(String::as_str).unwrap_or("?");
            let tag = if split.is_unseen(k) { "unseen" } else { "seen" };
            let value = if self.absent.contains(&k) {
                "absent".to_string()
            } else {
                format!("{:.1}", 100.0 * iou)
            };
            let _ = writeln!(out, "{name:<width$}  {tag:<6}  {value:>7}");
        }
        let _ = writeln!(
            out,
            "mIoU seen {:.1}  unseen {:.1}  all {:.1}  hIoU {:.1}  acc {:.1}",
            100.0 * self.miou_seen,
            100.0 * self.miou_unseen,
            100.0 * self.miou_all,
            100.0 * self.hiou,
            100.0 * self.accuracy
        );
        out
    }
}

/// Confusion-based metrics for one flat list of point predictions.
pub fn compute_metrics(predictions: &[usize], ground_truth: &[i32], split: &SplitSpec) -> Result<MetricsReport> {
    if predictions.len() != ground_truth.len() {
        return Err(Error::shape("predictions vs ground truth", ground_truth.len(), predictions.len()));
    }
    let c = split.class_count();
    let mut confusion = vec![vec![0u64; c]; c];
    for (i, (&p, &t)) in predictions.iter().zip(ground_truth).enumerate() {
        if t < 0 || t as usize >= c {
            return Err(Error::Validation(format!(
                "ground truth of point {i} is {t}; evaluation needs unmasked labels in [0, {c})"
            )));
        }
        if p >= c {
            return Err(Error::Validation(format!("prediction of point {i} is {p}, outside [0, {c})")));
        }
        confusion[t as usize][p] += 1;
    }
    MetricsReport::from_confusion(confusion, split)
}
