use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::numerics::{AdamConfig, Precision};
use crate::objective::LossConfig;
use crate::pipeline::{DataConfig, GradcheckConfig, GridSpec, TrainConfig};
use crate::reprs::ModelConfig;
use crate::scenegen::{AugmentStrength, SceneConfig};

/// Where scenes, classes and embeddings come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataSection {
    /// Directory written by `gen`. Empty: generate in memory from `seed`.
    pub scenes: String,
    /// Taxonomy TOML file. Empty: the shipped taxonomy.
    pub taxonomy: String,
    /// Held-out class names. Empty: the shipped taxonomy's split.
    pub unseen: Vec<String>,
    /// Embedding text file. Empty: synthesize from primitive mixtures.
    pub embeddings: String,
    pub train_scenes: usize,
    pub test_scenes: usize,
    pub embedding_noise: f64,
    pub scene: SceneConfig,
}

impl Default for DataSection {
    fn default() -> Self {
        let d = DataConfig::default();
        Self {
            scenes: String::new(),
            taxonomy: String::new(),
            unseen: Vec::new(),
            embeddings: String::new(),
            train_scenes: d.train_scenes,
            test_scenes: d.test_scenes,
            embedding_noise: d.embedding_noise,
            scene: d.scene,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_scenes: usize,
    pub points_per_scene: usize,
    pub k_neighbors: usize,
    pub precision: Precision,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            batch_scenes: t.batch_scenes,
            points_per_scene: t.points_per_scene,
            k_neighbors: t.k_neighbors,
            precision: t.precision,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentSection {
    pub weak: AugmentStrength,
    pub strong: AugmentStrength,
}

impl Default for AugmentSection {
    fn default() -> Self {
        Self {
            weak: AugmentStrength::weak(),
            strong: AugmentStrength::strong(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    /// Checkpoint file, or a `train` run directory containing `checkpoint.bin`.
    pub checkpoint: String,
}

/// Everything a command needs, one TOML section per module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Root of every random stream.
    pub seed: u64,
    /// Parent directory of run directories.
    pub out: String,
    pub data: DataSection,
    pub train: TrainSection,
    pub model: ModelConfig,
    pub loss: LossConfig,
    pub optim: AdamConfig,
    pub augment: AugmentSection,
    pub eval: EvalSection,
    pub gradcheck: GradcheckConfig,
    pub ablation: GridSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: "runs".into(),
            data: DataSection::default(),
            train: TrainSection::default(),
            model: ModelConfig::default(),
            loss: LossConfig::default(),
            optim: AdamConfig::default(),
            augment: AugmentSection::default(),
            eval: EvalSection::default(),
            gradcheck: GradcheckConfig::default(),
            ablation: GridSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_scenes: self.train.batch_scenes,
            points_per_scene: self.train.points_per_scene,
            k_neighbors: self.train.k_neighbors,
            seed: self.seed,
            precision: self.train.precision,
            adam: self.optim,
            model: self.model.clone(),
            loss: self.loss.clone(),
            weak_augment: self.augment.weak,
            strong_augment: self.augment.strong,
        }
    }

    pub fn data_config(&self) -> DataConfig {
        DataConfig {
            train_scenes: self.data.train_scenes,
            test_scenes: self.data.test_scenes,
            scene: self.data.scene,
            embedding_noise: self.data.embedding_noise,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        self.gradcheck.validate()?;
        self.ablation.validate()
    }

    /// The resolved configuration as TOML; parsing it back yields `self`.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("serializing config: {e}")))
    }

    /// Parses a config file body (defaults fill missing keys).
    pub fn from_toml(text: &str) -> Result<Self> {
        ConfigBuilder::from_toml(text, "config")?.build()
    }
}

/// Layers a config file and `key=value` overrides over the defaults.
#[derive(Debug, Clone, Default)]
pub struct ConfigBuilder {
    table: Table,
}

impl ConfigBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_toml(text: &str, source: &str) -> Result<Self> {
        let table: Table = toml::from_str(text).map_err(|e| Error::Parse {
            location: source.to_string(),
            message: e.to_string(),
        })?;
        Ok(Self { table })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    /// Applies `section.key=value`. The value is read as a TOML literal, or
    /// as a bare string when it is not one.
    pub fn set(&mut self, assignment: &str) -> Result<&mut Self> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{assignment}' is not key=value")))?;
        let key = key.trim();
        if key.is_empty() || key.split('.').any(str::is_empty) {
            return Err(Error::Config(format!("override '{assignment}' has an empty key")));
        }
        let raw = raw.trim();
        let value = toml::from_str::<Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(raw.to_string()));
        let mut parts: Vec<&str> = key.split('.').collect();
        let last = parts.pop().unwrap();
        let mut table = &mut self.table;
        for part in parts {
            let entry = table.entry(part).or_insert_with(|| Value::Table(Table::new()));
            table = entry
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("override '{key}': '{part}' is not a section")))?;
        }
        table.insert(last.to_string(), value);
        Ok(self)
    }

    pub fn set_value(&mut self, key: &str, value: Value) -> &mut Self {
        self.table.insert(key.to_string(), value);
        self
    }

    /// Rejects unknown keys, deserializes and validates.
    pub fn build(&self) -> Result<RunConfig> {
        let defaults = Value::try_from(RunConfig::default())
            .map_err(|e| Error::Config(format!("serializing defaults: {e}")))?;
        let mut unknown = Vec::new();
        collect_unknown(&self.table, defaults.as_table().unwrap(), "", &mut unknown);
        if !unknown.is_empty() {
            return Err(Error::Config(format!("unknown config keys: {}", unknown.join("; "))));
        }
        let cfg: RunConfig = Value::Table(self.table.clone())
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn collect_unknown(user: &Table, known: &Table, prefix: &str, out: &mut Vec<String>) {
    for (key, value) in user {
        let path = format!("{prefix}{key}");
        match known.get(key) {
            Some(Value::Table(k)) => {
                if let Value::Table(u) = value {
                    collect_unknown(u, k, &format!("{path}."), out);
                }
            }
            Some(_) => {}
            None => {
                let best = known
                    .keys()
                    .map(|k| (strsim::damerau_levenshtein(key, k), k))
                    .filter(|(d, k)| *d <= 2.max(k.len() / 3))
                    .min();
                out.push(match best {
                    Some((_, k)) => format!("'{path}' (did you mean '{prefix}{k}'?)"),
                    None => format!("'{path}'"),
                });
            }
        }
    }
}

/// `<out>/<command>-<timestamp>-seed<seed>`, suffixed when it already exists.
pub fn run_dir(out: &Path, command: &str, seed: u64) -> Result<PathBuf> {
    let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
    let base = format!("{command}-{stamp}-seed{seed}");
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    for n in 0.. {
        let name = if n == 0 { base.clone() } else { format!("{base}-{n}") };
        let dir = out.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(Error::io(&dir, e)),
        }
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn defaults_mirror_library_defaults() {
        let cfg = RunConfig::default();
        let t = cfg.train_config();
        assert_eq!(t, TrainConfig::default());
        assert_eq!(cfg.data_config(), DataConfig::default());
        assert_eq!(cfg.model.prototypes, 128);
        assert_eq!(cfg.model.kernels, 16);
        assert_eq!(cfg.model.lambda, 4.0);
    }

    #[test]
    fn partial_file_keeps_other_defaults() {
        let cfg = RunConfig::from_toml("seed = 7\n[model]\nprototypes = 32\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.train_config().seed, 7);
        assert_eq!(cfg.model.prototypes, 32);
        assert_eq!(cfg.model.kernels, 16);
    }

    #[test]
    fn misspelled_key_gets_suggestion() {
        let err = RunConfig::from_toml("[model]\nlamda = 2.0\n").unwrap_err().to_string();
        assert!(err.contains("model.lamda"), "{err}");
        assert!(err.contains("did you mean 'model.lambda'"), "{err}");
    }

    #[test]
    fn all_unknown_keys_are_listed() {
        let err = RunConfig::from_toml("bogus = 1\n[trian]\nepochs = 3\n[loss]\nzzzzzzzz = 1\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("'bogus'"), "{err}");
        assert!(err.contains("did you mean 'train'"), "{err}");
        assert!(err.contains("'loss.zzzzzzzz'"), "{err}");
    }

    #[test]
    fn overrides_parse_literals_and_bare_strings() {
        let mut b = ConfigBuilder::from_toml("[train]\nepochs = 3\n", "t").unwrap();
        b.set("train.epochs=5").unwrap();
        b.set("loss.variant=seen_plus_self").unwrap();
        b.set("model.lambda = 2.5").unwrap();
        b.set("ablation.seeds=[4, 5]").unwrap();
        b.set("data.unseen=[\"desk\"]").unwrap();
        let cfg = b.build().unwrap();
        assert_eq!(cfg.train.epochs, 5);
        assert_eq!(cfg.loss.variant, crate::objective::Variant::SeenPlusSelf);
        assert_eq!(cfg.model.lambda, 2.5);
        assert_eq!(cfg.ablation.seeds, vec![4, 5]);
        assert_eq!(cfg.data.unseen, vec!["desk".to_string()]);
    }

    #[test]
    fn bad_overrides_are_rejected() {
        let mut b = ConfigBuilder::new();
        assert!(b.set("noequals").is_err());
        assert!(b.set("=3").is_err());
        b.set("seed=1").unwrap();
        assert!(b.set("seed.x=1").is_err());
        let mut b = ConfigBuilder::new();
        b.set("model.lamda=1").unwrap();
        assert!(b.build().unwrap_err().to_string().contains("model.lambda"));
        let mut b = ConfigBuilder::new();
        b.set("train.epochs=many").unwrap();
        assert!(b.build().is_err());
    }

    #[test]
    fn invalid_values_fail_validation() {
        assert!(RunConfig::from_toml("[optim]\nlr = -1.0\n").is_err());
        assert!(RunConfig::from_toml("[model]\nprototypes = 0\n").is_err());
    }

    #[test]
    fn run_dirs_are_unique() {
        let root = tempfile::tempdir().unwrap();
        let a = run_dir(root.path(), "train", 3).unwrap();
        let b = run_dir(root.path(), "train", 3).unwrap();
        assert_ne!(a, b);
        let name = a.file_name().unwrap().to_string_lossy().to_string();
        assert!(name.starts_with("train-") && name.ends_with("-seed3"), "{name}");
    }
}
