use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::primitive::pose_point;
use super::scene::Scene;
use super::taxonomy::CategoryTemplate;
use crate::error::{Error, Result};
use crate::numerics::{derive_seed, seeded_rng, Rng64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub objects_min: usize,
    pub objects_max: usize,
    /// Half-width of the square floor, meters.
    pub floor_extent: f64,
    /// Minimum gap between object footprints, meters.
    pub min_separation: f64,
    pub max_retries: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            objects_min: 4,
            objects_max: 6,
            floor_extent: 4.0,
            min_separation: 0.3,
            max_retries: 500,
        }
    }
}

/// Places jittered category instances on the floor without overlap.
///
/// Categories are drawn without replacement from a shuffled deck (reshuffled
/// when exhausted), so every class is equally represented over many scenes.
pub fn generate_scene(
    templates: &[CategoryTemplate],
    cfg: &SceneConfig,
    rng: &mut Rng64,
) -> Result<Scene> {
    if templates.is_empty() {
        return Err(Error::Config("scene generation needs at least one template".into()));
    }
    if cfg.objects_min == 0 || cfg.objects_min > cfg.objects_max {
        return Err(Error::Config(format!(
            "invalid object range {}..={}",
            cfg.objects_min, cfg.objects_max
        )));
    }
    if !(cfg.floor_extent > 0.0) || !(cfg.min_separation >= 0.0) {
        return Err(Error::Config("floor extent must be > 0 and separation >= 0".into()));
    }

    let count = rng.random_range(cfg.objects_min..=cfg.objects_max);
    let mut deck: Vec<usize> = Vec::new();
    let mut placed: Vec<([f64; 2], f64)> = Vec::new();
    let mut scene = Scene {
        points: Vec::new(),
        labels: Vec::new(),
        object_ids: Vec::new(),
        class_count: templates.len(),
    };

    for object in 0..count {
        if deck.is_empty() {
            deck = (0..templates.len()).collect();
            deck.shuffle(rng);
        }
        let class = deck.pop().unwrap();
        let local = templates[class].instantiate(rng)?;
        let radius = local
            .iter()
            .map(|p| (p[0] * p[0] + p[1] * p[1]).sqrt())
            .fold(0.0, f64::max);
        let yaw = rng.random_range(0.0..TAU);

        let span = (cfg.floor_extent - radius).max(0.0);
        let mut position = None;
        for _ in 0..cfg.max_retries {
            let candidate = [rng.random_range(-span..=span), rng.random_range(-span..=span)];
            let clear = placed.iter().all(|(c, r)| {
                let d = ((c[0] - candidate[0]).powi(2) + (c[1] - candidate[1]).powi(2)).sqrt();
                d >= r + radius + cfg.min_separation
            });
            if clear {
                position = Some(candidate);
                break;
            }
        }
        let Some(center) = position else {
            return Err(Error::Generation(format!(
                "could not place object {object} ('{}') after {} attempts",
                templates[class].name, cfg.max_retries
            )));
        };
        placed.push((center, radius));

        let translation = [center[0], center[1], 0.0];
        for p in local {
            scene.points.push(pose_point(p, yaw, translation));
            scene.labels.push(class as i32);
            scene.object_ids.push(object as u32);
        }
    }
    scene.validate()?;
    Ok(scene)
}

/// Generates scenes `start..start + count`, scene `i` using its own RNG
/// derived from `(seed, i)`; any sub-range reproduces the same scenes.
pub fn generate_scenes(
    templates: &[CategoryTemplate],
    cfg: &SceneConfig,
    seed: u64,
    start: u64,
    count: usize,
) -> Result<Vec<Scene>> {
    (start..start + count as u64)
        .map(|i| {
            let mut rng = seeded_rng(derive_seed(seed, "scene", i));
            generate_scene(templates, cfg, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenegen::default_taxonomy;
    use std::collections::BTreeSet;

    #[test]
    fn single_template_single_object() {
        let d = default_taxonomy();
        let templates = &d.taxonomy.categories[3..4];
        let cfg = SceneConfig {
            objects_min: 1,
            objects_max: 1,
            ..Default::default()
        };
        let s = generate_scene(templates, &cfg, &mut seeded_rng(1)).unwrap();
        assert!(s.labels.iter().all(|&l| l == 0));
        assert_eq!(s.len(), templates[0].point_budget());
    }

    #[test]
    fn requested_object_count_is_exact() {
        let d = default_taxonomy();
        let cfg = SceneConfig {
            objects_min: 5,
            objects_max: 5,
            ..Default::default()
        };
        let s = generate_scene(&d.taxonomy.categories, &cfg, &mut seeded_rng(2)).unwrap();
        let ids: BTreeSet<u32> = s.object_ids.iter().copied().collect();
        assert_eq!(ids.len(), 5);
    }

    #[test]
    fn impossible_placement_fails_cleanly() {
        let d = default_taxonomy();
        let cfg = SceneConfig {
            objects_min: 6,
            objects_max: 6,
            floor_extent: 0.5,
            min_separation: 1.0,
            max_retries: 20,
        };
        let err = generate_scene(&d.taxonomy.categories, &cfg, &mut seeded_rng(3)).unwrap_err();
        assert!(matches!(err, Error::Generation(_)));
    }

    #[test]
    fn sub_ranges_reproduce_scenes() {
        let d = default_taxonomy();
        let cfg = SceneConfig::default();
        let all = generate_scenes(&d.taxonomy.categories, &cfg, 11, 0, 4).unwrap();
        let tail = generate_scenes(&d.taxonomy.categories, &cfg, 11, 2, 2).unwrap();
        assert_eq!(all[2..], tail[..]);
    }
}
