use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::derive_seed;
use crate::scenegen::{
    generate_scenes, mask_unseen_labels, read_scene, write_scene, Scene, SplitSpec, Taxonomy, UNLABELED,
};
use crate::semantics::{load_embeddings, synthesize_embeddings, write_embeddings, EmbeddingTable};

use super::config::DataConfig;

/// Masked training scenes, fully labeled held-out scenes and class
/// embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub class_names: Vec<String>,
    pub split: SplitSpec,
    pub embeddings: EmbeddingTable,
    /// Unseen-class points carry `UNLABELED`.
    pub train: Vec<Scene>,
    /// Ground truth for evaluation only.
    pub test: Vec<Scene>,
}

impl Dataset {
    pub fn training_set(&self) -> TrainingSet<'_> {
        TrainingSet {
            scenes: &self.train,
            split: &self.split,
            embeddings: &self.embeddings,
        }
    }
}

/// What the trainer is allowed to see.
#[derive(Debug, Clone, Copy)]
pub struct TrainingSet<'a> {
    pub scenes: &'a [Scene],
    pub split: &'a SplitSpec,
    pub embeddings: &'a EmbeddingTable,
}

/// Generates train/test scenes from `taxonomy` and synthesizes embeddings
/// of dimension `embedding_dim`. Every random stream derives from `seed`.
pub fn synthetic_dataset(
    taxonomy: &Taxonomy,
    split: &SplitSpec,
    cfg: &DataConfig,
    embedding_dim: usize,
    seed: u64,
) -> Result<Dataset> {
    split.validate_covers(taxonomy.len())?;
    if cfg.train_scenes == 0 {
        return Err(Error::Config("data.train_scenes must be >= 1".into()));
    }
    let names = taxonomy.names();
    let full_train = generate_scenes(
        &taxonomy.categories,
        &cfg.scene,
        derive_seed(seed, "train-scenes", 0),
        0,
        cfg.train_scenes,
    )?;
    let train = full_train
        .iter()
        .map(|s| mask_unseen_labels(s, split).map(|m| m.into_parts().0))
        .collect::<Result<Vec<_>>>()?;
    let test = generate_scenes(
        &taxonomy.categories,
        &cfg.scene,
        derive_seed(seed, "test-scenes", 0),
        0,
        cfg.test_scenes,
    )?;
    let embeddings = synthesize_embeddings(
        taxonomy.mixture_matrix().view(),
        &names,
        embedding_dim,
        cfg.embedding_noise,
        derive_seed(seed, "embeddings", 0),
    )?;
    Ok(Dataset {
        class_names: names,
        split: split.clone(),
        embeddings,
        train,
        test,
    })
}

/// Contents of `classes.toml` in a data set directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ClassFile {
    names: Vec<String>,
    seen: Vec<usize>,
    unseen: Vec<usize>,
}

/// Writes `data` as a directory:
///
/// ```text
/// classes.toml      class names and split
/// embeddings.txt    one embedding per class
/// train/NNNN.scene  unseen labels masked
/// test/NNNN.scene   full ground truth
/// ```
pub fn write_dataset(data: &Dataset, dir: &Path) -> Result<()> {
    let classes = ClassFile {
        names: data.class_names.clone(),
        seen: data.split.seen.iter().copied().collect(),
        unseen: data.split.unseen.iter().copied().collect(),
    };
    let text = toml::to_string(&classes).map_err(|e| Error::Config(format!("serializing classes: {e}")))?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("classes.toml");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    write_embeddings(&data.embeddings, &dir.join("embeddings.txt"))?;
    for (sub, scenes) in [("train", &data.train), ("test", &data.test)] {
        let d = dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        for (i, scene) in scenes.iter().enumerate() {
            write_scene(scene, &d.join(format!("{i:04}.scene")))?;
        }
    }
    Ok(())
}

/// Reads a directory written by [`write_dataset`]. Training scenes are
/// masked again on load, so hand-edited files cannot leak unseen labels.
pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let path = dir.join("classes.toml");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let classes: ClassFile = toml::from_str(&text).map_err(|e| Error::Parse {
        location: path.display().to_string(),
        message: e.to_string(),
    })?;
    let split = SplitSpec::new(classes.seen, classes.unseen)?;
    split.validate_covers(classes.names.len())?;
    let embeddings = load_embeddings(&dir.join("embeddings.txt"), &classes.names, false)?;
    let read_all = |sub: &str| -> Result<Vec<Scene>> {
        let d = dir.join(sub);
        let mut files: Vec<_> = std::fs::read_dir(&d)
            .map_err(|e| Error::io(&d, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "scene"))
            .collect();
        files.sort();
        let scenes = files.iter().map(|p| read_scene(p)).collect::<Result<Vec<_>>>()?;
        if let Some(s) = scenes.iter().find(|s| s.class_count != classes.names.len()) {
            return Err(Error::Validation(format!(
                "{sub} scene declares {} classes, data set has {}",
                s.class_count,
                classes.names.len()
            )));
        }
        Ok(scenes)
    };
    let mut train = read_all("train")?;
    for scene in &mut train {
        for l in &mut scene.labels {
            if *l >= 0 && split.is_unseen(*l as usize) {
                *l = UNLABELED;
            }
        }
    }
    let test = read_all("test")?;
    if train.is_empty() {
        return Err(Error::Validation(format!("{} has no training scenes", dir.display())));
    }
    Ok(Dataset {
        class_names: classes.names,
        split,
        embeddings,
        train,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenegen::{default_taxonomy, SceneConfig};

    fn small() -> Dataset {
        let d = default_taxonomy();
        let cfg = DataConfig {
            train_scenes: 3,
            test_scenes: 2,
            scene: SceneConfig::default(),
            embedding_noise: 0.05,
        };
        synthetic_dataset(&d.taxonomy, &d.split, &cfg, 16, 4).unwrap()
    }

    #[test]
    fn training_scenes_are_masked() {
        let data = small();
        for s in &data.train {
            for &l in &s.labels {
                assert!(l == UNLABELED || data.split.is_seen(l as usize));
            }
        }
        assert!(data.test.iter().any(|s| s.labels.iter().any(|&l| l >= 0 && data.split.is_unseen(l as usize))));
    }

    #[test]
    fn directory_round_trip_is_exact() {
        let data = small();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&data, dir.path()).unwrap();
        let mut back = read_dataset(dir.path()).unwrap();
        assert_eq!(back.embeddings.source, crate::semantics::EmbeddingSource::File);
        back.embeddings.source = data.embeddings.source;
        assert_eq!(back, data);
    }

    #[test]
    fn unmasked_training_files_are_masked_on_load() {
        let d = default_taxonomy();
        let mut data = small();
        let full = generate_scenes(&d.taxonomy.categories, &SceneConfig::default(), 9, 0, 1).unwrap();
        data.train = full.clone();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&data, dir.path()).unwrap();
        let back = read_dataset(dir.path()).unwrap();
        let expected = mask_unseen_labels(&full[0], &data.split).unwrap().into_parts().0;
        assert_eq!(back.train, vec![expected]);
    }

    #[test]
    fn missing_directory_is_a_path_error() {
        let err = read_dataset(Path::new("/nonexistent/primseg-data")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/primseg-data"), "{err}");
    }
}
