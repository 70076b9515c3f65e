use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::primitive::pose_point;
use super::scene::Scene;
use crate::numerics::Rng64;

/// Augmentation ranges. A zero-valued field disables that transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentStrength {
    /// Rotation about the vertical axis drawn from `[-r, r]` radians.
    pub rotation_range: f64,
    pub jitter_sigma: f64,
    /// Isotropic scale drawn from `[lo, hi]`; `[1, 1]` disables scaling.
    pub scale_range: [f64; 2],
}

impl Default for AugmentStrength {
    fn default() -> Self {
        Self::NONE
    }
}

impl AugmentStrength {
    pub const NONE: AugmentStrength = AugmentStrength {
        rotation_range: 0.0,
        jitter_sigma: 0.0,
        scale_range: [1.0, 1.0],
    };

    pub fn weak() -> Self {
        Self {
            rotation_range: 0.2,
            jitter_sigma: 0.002,
            scale_range: [0.98, 1.02],
        }
    }

    pub fn strong() -> Self {
        Self {
            rotation_range: std::f64::consts::PI,
            jitter_sigma: 0.01,
            scale_range: [0.9, 1.1],
        }
    }
}

/// Rotates about the vertical axis through the origin, jitters each point,
/// then scales. Labels, object ids, and point order are untouched, so the
/// i-th point of two augmented copies is the same physical point.
pub fn augment_scene(scene: &Scene, strength: &AugmentStrength, rng: &mut Rng64) -> Scene {
    let mut out = scene.clone();
    if strength.rotation_range > 0.0 {
        let yaw = rng.random_range(-strength.rotation_range..=strength.rotation_range);
        rotate_scene(&mut out, yaw);
    }
    if strength.jitter_sigma > 0.0 {
        for p in &mut out.points {
            for v in p.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *v += strength.jitter_sigma * z;
            }
        }
    }
    let [lo, hi] = strength.scale_range;
    if !(lo == 1.0 && hi == 1.0) {
        let s = if lo < hi { rng.random_range(lo..=hi) } else { lo };
        scale_scene(&mut out, s);
    }
    out
}

pub fn rotate_scene(scene: &mut Scene, yaw: f64) {
    for p in &mut scene.points {
        *p = pose_point(*p, yaw, [0.0; 3]);
    }
}

pub fn scale_scene(scene: &mut Scene, factor: f64) {
    for p in &mut scene.points {
        for v in p.iter_mut() {
            *v *= factor;
        }
    }
}
