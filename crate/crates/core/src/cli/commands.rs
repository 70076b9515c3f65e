use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::pipeline::{
    evaluate, load_checkpoint, read_dataset, run_ablation_grid, run_gradcheck_suite, save_checkpoint,
    synthetic_dataset, train, write_dataset, Dataset,
};
use crate::scenegen::{default_taxonomy, SplitSpec, Taxonomy};
use crate::semantics::load_embeddings;

use super::config::{run_dir, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Gen,
    Train,
    Eval,
    Gradcheck,
    Ablate,
}

impl Command {
    pub const ALL: [Command; 5] = [Command::Gen, Command::Train, Command::Eval, Command::Gradcheck, Command::Ablate];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Gen => "gen",
            Command::Train => "train",
            Command::Eval => "eval",
            Command::Gradcheck => "gradcheck",
            Command::Ablate => "ablate",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown command '{s}'")))
    }
}

/// Result of a command that ran to completion.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub run_dir: PathBuf,
    /// False when the command's own check failed (gradient check).
    pub success: bool,
    pub summary: String,
}

/// Runs `command` in a fresh run directory under `cfg.out`, after echoing
/// the resolved config into it.
pub fn execute(command: Command, cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let dir = run_dir(Path::new(&cfg.out), command.as_str(), cfg.seed)?;
    write(&dir.join("config.toml"), &cfg.to_toml()?)?;
    let (success, summary) = match command {
        Command::Gen => cmd_gen(cfg, &dir)?,
        Command::Train => cmd_train(cfg, &dir)?,
        Command::Eval => cmd_eval(cfg, &dir)?,
        Command::Gradcheck => cmd_gradcheck(cfg, &dir)?,
        Command::Ablate => cmd_ablate(cfg, &dir)?,
    };
    Ok(Outcome {
        run_dir: dir,
        success,
        summary,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn json<T: serde::Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Config(format!("serializing JSON: {e}")))
}

/// Taxonomy and split named by `[data]`.
pub fn resolve_taxonomy(cfg: &RunConfig) -> Result<(Taxonomy, SplitSpec)> {
    let shipped = default_taxonomy();
    let taxonomy = if cfg.data.taxonomy.is_empty() {
        shipped.taxonomy.clone()
    } else {
        Taxonomy::load(Path::new(&cfg.data.taxonomy))?
    };
    if cfg.data.unseen.is_empty() {
        if cfg.data.taxonomy.is_empty() {
            return Ok((taxonomy, shipped.split));
        }
        return Err(Error::Config("data.unseen must name the held-out classes of a custom taxonomy".into()));
    }
    let unseen = cfg
        .data
        .unseen
        .iter()
        .map(|n| {
            taxonomy
                .index_of(n)
                .ok_or_else(|| Error::Config(format!("data.unseen: no class named '{n}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    let split = SplitSpec::holding_out(taxonomy.len(), &unseen)?;
    Ok((taxonomy, split))
}

/// The data set named by `[data]`: a `gen` directory if given, otherwise
/// generated from `seed`.
pub fn resolve_dataset(cfg: &RunConfig, seed: u64) -> Result<Dataset> {
    let mut data = if cfg.data.scenes.is_empty() {
        let (taxonomy, split) = resolve_taxonomy(cfg)?;
        synthetic_dataset(&taxonomy, &split, &cfg.data_config(), cfg.model.embedding_dim, seed)?
    } else {
        read_dataset(Path::new(&cfg.data.scenes))?
    };
    if !cfg.data.embeddings.is_empty() {
        data.embeddings = load_embeddings(Path::new(&cfg.data.embeddings), &data.class_names, true)?;
    }
    if data.embeddings.dim() != cfg.model.embedding_dim {
        return Err(Error::shape(
            "embeddings vs model.embedding_dim",
            cfg.model.embedding_dim,
            data.embeddings.dim(),
        ));
    }
    Ok(data)
}

fn cmd_gen(cfg: &RunConfig, dir: &Path) -> Result<(bool, String)> {
    let (taxonomy, _) = resolve_taxonomy(cfg)?;
    let data = resolve_dataset(cfg, cfg.seed)?;
    write_dataset(&data, dir)?;
    write(&dir.join("taxonomy.toml"), &taxonomy.to_toml()?)?;
    let count = |scenes: &[crate::scenegen::Scene]| scenes.iter().map(|s| s.len()).sum::<usize>();
    Ok((
        true,
        format!(
            "{} train scenes ({} points), {} test scenes ({} points), {} classes, unseen: {}",
            data.train.len(),
            count(&data.train),
            data.test.len(),
            count(&data.test),
            data.class_names.len(),
            data.split
                .unseen
                .iter()
                .map(|&c| data.class_names[c].as_str())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    ))
}

fn cmd_train(cfg: &RunConfig, dir: &Path) -> Result<(bool, String)> {
    let data = resolve_dataset(cfg, cfg.seed)?;
    let outcome = train(&cfg.train_config(), data.training_set())?;
    save_checkpoint(&outcome.model, &dir.join("checkpoint.bin"))?;
    write(&dir.join("train_log.csv"), &outcome.log.epochs_csv())?;
    write(&dir.join("train_log.json"), &json(&outcome.log)?)?;
    let mut summary = format!(
        "{} epochs, {} steps",
        outcome.log.epochs.len(),
        outcome.log.steps.len()
    );
    if let Some(last) = outcome.log.epochs.last() {
        let _ = write!(
            summary,
            ", final loss {:.4} (seen {:.4}, auxiliary {:.4}), seen accuracy {:.3}",
            last.loss, last.seen, last.auxiliary, last.seen_accuracy
        );
    }
    for (w, n) in &outcome.log.warnings {
        let _ = write!(summary, "\nwarning ({n}x): {w}");
    }
    Ok((true, summary))
}

fn checkpoint_path(cfg: &RunConfig) -> Result<PathBuf> {
    if cfg.eval.checkpoint.is_empty() {
        return Err(Error::Config("eval.checkpoint is required (file or train run directory)".into()));
    }
    let p = PathBuf::from(&cfg.eval.checkpoint);
    Ok(if p.is_dir() { p.join("checkpoint.bin") } else { p })
}

fn cmd_eval(cfg: &RunConfig, dir: &Path) -> Result<(bool, String)> {
    let model = load_checkpoint(&checkpoint_path(cfg)?, &cfg.model)?;
    let data = resolve_dataset(cfg, cfg.seed)?;
    if model.class_count() != data.class_names.len() {
        return Err(Error::shape("checkpoint classes vs data set", data.class_names.len(), model.class_count()));
    }
    let report = evaluate(&model, &data.test, &data.split, cfg.train.k_neighbors)?;
    let table = report.to_table(&data.class_names, &data.split);
    write(&dir.join("metrics.json"), &json(&report)?)?;
    write(&dir.join("metrics.txt"), &table)?;
    Ok((true, table))
}

fn cmd_gradcheck(cfg: &RunConfig, dir: &Path) -> Result<(bool, String)> {
    let checks = run_gradcheck_suite(&cfg.gradcheck, cfg.seed)?;
    let mut table = format!(
        "{:<40} {:>8} {:>12}  status\n",
        "block / tensor", "entries", "max rel err"
    );
    for c in &checks {
        for p in &c.report.params {
            let status = if p.max_rel_error <= c.report.tolerance { "ok" } else { "FAIL" };
            let _ = writeln!(
                table,
                "{:<40} {:>8} {:>12.3e}  {status}",
                format!("{} / {}", c.block, p.name),
                p.checked,
                p.max_rel_error
            );
        }
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed()).map(|c| c.block.as_str()).collect();
    let _ = write!(
        table,
        "{} blocks, tolerance {:e}: {}",
        checks.len(),
        cfg.gradcheck.tolerance,
        if failed.is_empty() { "all passed".to_string() } else { format!("FAILED: {}", failed.join(", ")) }
    );
    write(&dir.join("gradcheck.json"), &json(&checks)?)?;
    write(&dir.join("gradcheck.txt"), &table)?;
    Ok((failed.is_empty(), table))
}

fn cmd_ablate(cfg: &RunConfig, dir: &Path) -> Result<(bool, String)> {
    let table = run_ablation_grid(&cfg.train_config(), &cfg.ablation, |seed| resolve_dataset(cfg, seed))?;
    let text = table.to_table();
    write(&dir.join("ablation.jsonl"), &table.to_json_lines()?)?;
    write(&dir.join("ablation.txt"), &text)?;
    Ok((true, text))
}
