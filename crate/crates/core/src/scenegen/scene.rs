use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label of a point whose class is hidden from training.
pub const UNLABELED: i32 = -1;

/// A labeled point cloud built from primitive-composed objects.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub points: Vec<[f64; 3]>,
    pub labels: Vec<i32>,
    pub object_ids: Vec<u32>,
    pub class_count: usize,
}

impl Scene {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::Validation("scene has no points".into()));
        }
        if self.labels.len() != self.points.len() || self.object_ids.len() != self.points.len() {
            return Err(Error::Validation(format!(
                "scene arrays disagree: {} points, {} labels, {} object ids",
                self.points.len(),
                self.labels.len(),
                self.object_ids.len()
            )));
        }
        if let Some(i) = self.points.iter().position(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::Validation(format!("point {i} has a non-finite coordinate")));
        }
        if let Some(i) = self.labels.iter().position(|&l| !self.label_ok(l)) {
            return Err(Error::Validation(format!(
                "point {i} has label {} outside [0, {}) and is not UNLABELED",
                self.labels[i], self.class_count
            )));
        }
        Ok(())
    }

    fn label_ok(&self, label: i32) -> bool {
        label == UNLABELED || (label >= 0 && (label as usize) < self.class_count)
    }

    /// Number of points carrying each class label (unlabeled points skipped).
    pub fn class_histogram(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &l in &self.labels {
            if l >= 0 {
                counts[l as usize] += 1;
            }
        }
        counts
    }
}

/// Disjoint partition of class ids into seen and unseen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seen: BTreeSet<usize>,
    pub unseen: BTreeSet<usize>,
}

impl SplitSpec {
    pub fn new(
        seen: impl IntoIterator<Item = usize>,
        unseen: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let split = Self {
            seen: seen.into_iter().collect(),
            unseen: unseen.into_iter().collect(),
        };
        if let Some(c) = split.seen.intersection(&split.unseen).next() {
            return Err(Error::Config(format!("class {c} is both seen and unseen")));
        }
        Ok(split)
    }

    /// Holds out `unseen`; everything else in `0..class_count` is seen.
    pub fn holding_out(class_count: usize, unseen: &[usize]) -> Result<Self> {
        if let Some(c) = unseen.iter().find(|&&c| c >= class_count) {
            return Err(Error::Config(format!("unseen class {c} >= class count {class_count}")));
        }
        Self::new(
            (0..class_count).filter(|c| !unseen.contains(c)),
            unseen.iter().copied(),
        )
    }

    pub fn class_count(&self) -> usize {
        self.seen.len() + self.unseen.len()
    }

    /// Checks that the split covers exactly the classes `0..class_count`.
    pub fn validate_covers(&self, class_count: usize) -> Result<()> {
        let all: BTreeSet<usize> = self.seen.union(&self.unseen).copied().collect();
        let expected: BTreeSet<usize> = (0..class_count).collect();
        if all != expected {
            return Err(Error::Config(format!(
                "split covers classes {all:?}, expected 0..{class_count}"
            )));
        }
        Ok(())
    }

    pub fn is_seen(&self, class: usize) -> bool {
        self.seen.contains(&class)
    }

    pub fn is_unseen(&self, class: usize) -> bool {
        self.unseen.contains(&class)
    }

    /// Per-class seen flag for `0..class_count`.
    pub fn seen_mask(&self) -> Vec<bool> {
        (0..self.class_count()).map(|c| self.is_seen(c)).collect()
    }
}

/// Ground truth withheld from training, kept for evaluation only.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenTruth {
    pub labels: Vec<i32>,
    pub is_unseen_region: Vec<bool>,
}

/// A scene prepared for transductive training.
///
/// Training code receives only [`MaskedScene::training_view`]; the withheld
/// labels live in a separate field that the training path never takes.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedScene {
    scene: Scene,
    pub hidden: HiddenTruth,
}

impl MaskedScene {
    pub fn training_view(&self) -> &Scene {
        &self.scene
    }

    pub fn into_parts(self) -> (Scene, HiddenTruth) {
        (self.scene, self.hidden)
    }
}

/// Replaces the label of every unseen-class point with [`UNLABELED`].
pub fn mask_unseen_labels(scene: &Scene, split: &SplitSpec) -> Result<MaskedScene> {
    scene.validate()?;
    let mut masked = scene.clone();
    let mut is_unseen_region = vec![false; scene.len()];
    for (i, label) in masked.labels.iter_mut().enumerate() {
        if *label == UNLABELED {
            return Err(Error::Config(format!("point {i} is already unlabeled; expected full labels")));
        }
        let class = *label as usize;
        if split.is_unseen(class) {
            *label = UNLABELED;
            is_unseen_region[i] = true;
        } else if !split.is_seen(class) {
            return Err(Error::Config(format!("class {class} at point {i} is in neither split set")));
        }
    }
    Ok(MaskedScene {
        scene: masked,
        hidden: HiddenTruth {
            labels: scene.labels.clone(),
            is_unseen_region,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene() -> Scene {
        Scene {
            points: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.5], [0.0, 2.0, 1.0], [3.0, 3.0, 0.2]],
            labels: vec![0, 1, 2, 1],
            object_ids: vec![0, 1, 2, 1],
            class_count: 3,
        }
    }

    #[test]
    fn empty_unseen_set_is_noop() {
        let split = SplitSpec::new([0, 1, 2], []).unwrap();
        let m = mask_unseen_labels(&scene(), &split).unwrap();
        assert_eq!(m.training_view(), &scene());
        assert!(m.hidden.is_unseen_region.iter().all(|&b| !b));
    }

    #[test]
    fn all_unseen_masks_everything() {
        let split = SplitSpec::new([], [0, 1, 2]).unwrap();
        let m = mask_unseen_labels(&scene(), &split).unwrap();
        assert!(m.training_view().labels.iter().all(|&l| l == UNLABELED));
        assert_eq!(m.training_view().points, scene().points);
    }

    #[test]
    fn class_outside_split_is_an_error() {
        let split = SplitSpec::new([0], [1]).unwrap();
        assert!(mask_unseen_labels(&scene(), &split).is_err());
    }

    #[test]
    fn overlapping_split_rejected() {
        assert!(SplitSpec::new([0, 1], [1, 2]).is_err());
        let s = SplitSpec::holding_out(5, &[1, 3]).unwrap();
        assert!(s.validate_covers(5).is_ok());
        assert!(s.validate_covers(6).is_err());
    }

    #[test]
    fn validation_catches_bad_labels() {
        let mut s = scene();
        s.labels[2] = 3;
        assert!(s.validate().is_err());
        s.labels[2] = UNLABELED;
        assert!(s.validate().is_ok());
        s.points[0][1] = f64::NAN;
        assert!(s.validate().is_err());
    }
}
