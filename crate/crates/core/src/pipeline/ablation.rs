use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::Variant;

use super::config::TrainConfig;
use super::data::Dataset;
use super::metrics::MetricsReport;
use super::train_and_evaluate;

/// One grid row, written like `Base+L_u+GP128+MK16`.
///
/// `Base` alone means: no prototypes (the visual representation is the raw
/// backbone feature), one kernel, seen-class loss only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AblationCell {
    pub variant: Variant,
    /// `None` disables the prototype bank.
    pub prototypes: Option<usize>,
    pub kernels: usize,
}

impl AblationCell {
    pub const BASE: AblationCell = AblationCell {
        variant: Variant::SeenOnly,
        prototypes: None,
        kernels: 1,
    };

    /// `base` with this cell's variant, prototype and kernel settings.
    pub fn apply(&self, base: &TrainConfig) -> TrainConfig {
        let mut cfg = base.clone();
        cfg.loss.variant = self.variant;
        cfg.model.use_prototypes = self.prototypes.is_some();
        if let Some(m) = self.prototypes {
            cfg.model.prototypes = m;
        }
        cfg.model.kernels = self.kernels;
        cfg
    }
}

impl fmt::Display for AblationCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Base")?;
        match self.variant {
            Variant::SeenOnly => {}
            Variant::SeenPlusPseudo => f.write_str("+L_pseudo")?,
            Variant::SeenPlusSelf => f.write_str("+L_self")?,
            Variant::SeenPlusUnknownAware => f.write_str("+L_u")?,
        }
        if let Some(m) = self.prototypes {
            write!(f, "+GP{m}")?;
        }
        if self.kernels != 1 {
            write!(f, "+MK{}", self.kernels)?;
        }
        Ok(())
    }
}

impl FromStr for AblationCell {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::Config(format!("ablation cell '{s}': {why}"));
        let mut parts = s.split('+').map(|p| p.trim().to_ascii_lowercase());
        if parts.next().as_deref() != Some("base") {
            return Err(bad("must start with 'Base'"));
        }
        let mut cell = AblationCell::BASE;
        let mut loss_set = false;
        for part in parts {
            let number = |prefix: &str| -> Result<usize> {
                part[prefix.len()..]
                    .parse::<usize>()
                    .ok()
                    .filter(|&v| v > 0)
                    .ok_or_else(|| bad(&format!("'{part}' needs a positive count")))
            };
            match part.as_str() {
                "l_u" | "l_pseudo" | "l_self" => {
                    if loss_set {
                        return Err(bad("more than one auxiliary loss"));
                    }
                    loss_set = true;
                    cell.variant = match part.as_str() {
                        "l_u" => Variant::SeenPlusUnknownAware,
                        "l_pseudo" => Variant::SeenPlusPseudo,
                        _ => Variant::SeenPlusSelf,
                    };
                }
                p if p.starts_with("gp") => cell.prototypes = Some(number("gp")?),
                p if p.starts_with("mk") => cell.kernels = number("mk")?,
                _ => return Err(bad(&format!("unknown component '{part}'"))),
            }
        }
        Ok(cell)
    }
}

impl TryFrom<String> for AblationCell {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<AblationCell> for String {
    fn from(c: AblationCell) -> String {
        c.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub cells: Vec<AblationCell>,
    pub seeds: Vec<u64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            cells: vec![
                AblationCell::BASE,
                "Base+L_u".parse().unwrap(),
                "Base+L_u+GP128+MK16".parse().unwrap(),
            ],
            seeds: vec![0, 1, 2],
        }
    }
}

impl GridSpec {
    /// The full row structure of the published ablation: loss variants,
    /// kernel counts at `m` prototypes and prototype counts at `k` kernels.
    pub fn full_table(m: usize, k: usize, kernel_counts: &[usize], prototype_counts: &[usize], seeds: Vec<u64>) -> Self {
        let mut cells = vec![AblationCell::BASE];
        for variant in [Variant::SeenPlusPseudo, Variant::SeenPlusSelf, Variant::SeenPlusUnknownAware] {
            cells.push(AblationCell {
                variant,
                ..AblationCell::BASE
            });
        }
        let lu = |prototypes, kernels| AblationCell {
            variant: Variant::SeenPlusUnknownAware,
            prototypes,
            kernels,
        };
        cells.push(lu(None, k));
        cells.extend(kernel_counts.iter().map(|&kk| lu(Some(m), kk)));
        cells.extend(prototype_counts.iter().map(|&mm| lu(Some(mm), k)));
        let mut seen = std::collections::HashSet::new();
        cells.retain(|c| seen.insert(*c));
        Self { cells, seeds }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("ablation grid needs at least one cell and one seed".into()));
        }
        Ok(())
    }
}

/// Outcome of one (cell, seed) run; failures are recorded, not raised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub cell: String,
    pub seed: u64,
    pub final_loss: Option<f64>,
    pub metrics: Option<MetricsReport>,
    pub error: Option<String>,
}

/// Mean and sample standard deviation (`n - 1`; 0 for a single value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: String,
    pub runs: usize,
    pub failures: usize,
    pub miou_seen: Stat,
    pub miou_unseen: Stat,
    pub miou_all: Stat,
    pub hiou: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub runs: Vec<SeedRun>,
    pub summary: Vec<CellSummary>,
}

impl AblationTable {
    pub fn summary_for(&self, cell: &str) -> Option<&CellSummary> {
        self.summary.iter().find(|s| s.cell == cell)
    }

    /// One JSON object per line: every run, then every summary row.
    pub fn to_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for run in &self.runs {
            let line = serde_json::json!({ "record": "run", "run": run });
            let _ = writeln!(out, "{line}");
        }
        for row in &self.summary {
            let line = serde_json::json!({ "record": "summary", "summary": row });
            let _ = writeln!(out, "{line}");
        }
        Ok(out)
    }

    /// Aligned text table, values in percent as `mean ± std`.
    pub fn to_table(&self) -> String {
        let width = self.summary.iter().map(|s| s.cell.len()).max().unwrap_or(5).max(5);
        let mut out = format!(
            "{:<width$}  {:>13}  {:>13}  {:>13}  {:>13}  {:>4}\n",
            "model", "seen mIoU", "unseen mIoU", "all mIoU", "hIoU", "runs"
        );
        let cell = |s: Stat| format!("{:.1} ± {:.1}", 100.0 * s.mean, 100.0 * s.std);
        for s in &self.summary {
            let _ = writeln!(
                out,
                "{:<width$}  {:>13}  {:>13}  {:>13}  {:>13}  {:>4}",
                s.cell,
                cell(s.miou_seen),
                cell(s.miou_unseen),
                cell(s.miou_all),
                cell(s.hiou),
                format!("{}/{}", s.runs - s.failures, s.runs),
            );
        }
        out
    }
}

/// Trains and evaluates every cell for every seed. `make_dataset` is called
/// once per seed and the data set is shared by all cells; the training seed
/// equals the grid seed.
pub fn run_ablation_grid<F>(base: &TrainConfig, grid: &GridSpec, mut make_dataset: F) -> Result<AblationTable>
where
    F: FnMut(u64) -> Result<Dataset>,
{
    grid.validate()?;
    let mut datasets: BTreeMap<u64, std::result::Result<Dataset, String>> = BTreeMap::new();
    for &seed in &grid.seeds {
        datasets
            .entry(seed)
            .or_insert_with(|| make_dataset(seed).map_err(|e| e.to_string()));
    }
    let mut runs = Vec::new();
    let mut summary = Vec::new();
    for cell in &grid.cells {
        let name = cell.to_string();
        let mut cell_runs = Vec::new();
        for &seed in &grid.seeds {
            let mut cfg = cell.apply(base);
            cfg.seed = seed;
            let result = match &datasets[&seed] {
                Ok(data) => train_and_evaluate(&cfg, data).map_err(|e| e.to_string()),
                Err(e) => Err(format!("data set: {e}")),
            };
            cell_runs.push(match result {
                Ok((outcome, metrics)) => SeedRun {
                    cell: name.clone(),
                    seed,
                    final_loss: outcome.log.steps.last().map(|s| s.loss),
                    metrics: Some(metrics),
                    error: None,
                },
                Err(e) => SeedRun {
                    cell: name.clone(),
                    seed,
                    final_loss: None,
                    metrics: None,
                    error: Some(e),
                },
            });
        }
        let ok: Vec<&MetricsReport> = cell_runs.iter().filter_map(|r| r.metrics.as_ref()).collect();
        let stat = |f: fn(&MetricsReport) -> f64| Stat::of(&ok.iter().map(|m| f(m)).collect::<Vec<_>>());
        summary.push(CellSummary {
            cell: name,
            runs: cell_runs.len(),
            failures: cell_runs.len() - ok.len(),
            miou_seen: stat(|m| m.miou_seen),
            miou_unseen: stat(|m| m.miou_unseen),
            miou_all: stat(|m| m.miou_all),
            hiou: stat(|m| m.hiou),
        });
        runs.extend(cell_runs);
    }
    Ok(AblationTable { runs, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_names_round_trip() {
        for name in ["Base", "Base+L_u", "Base+L_pseudo", "Base+L_self", "Base+L_u+MK16", "Base+L_u+GP128+MK16"] {
            let cell: AblationCell = name.parse().unwrap();
            assert_eq!(cell.to_string(), name);
        }
        let full: AblationCell = "base + l_u + gp128 + mk16".parse().unwrap();
        assert_eq!(full.prototypes, Some(128));
        assert_eq!(full.kernels, 16);
    }

    #[test]
    fn malformed_cells_rejected() {
        for bad in ["", "L_u", "Base+L_u+L_self", "Base+GP", "Base+MK0", "Base+foo"] {
            assert!(bad.parse::<AblationCell>().is_err(), "{bad}");
        }
    }

    #[test]
    fn base_cell_disables_prototypes() {
        let cfg = AblationCell::BASE.apply(&TrainConfig::default());
        assert!(!cfg.model.use_prototypes);
        assert_eq!(cfg.model.kernels, 1);
        assert_eq!(cfg.loss.variant, Variant::SeenOnly);
    }

    #[test]
    fn full_table_has_published_rows() {
        let g = GridSpec::full_table(128, 16, &[2, 4, 8, 16, 32], &[48, 96, 128, 256], vec![0]);
        let names: Vec<String> = g.cells.iter().map(|c| c.to_string()).collect();
        assert_eq!(names[0], "Base");
        assert!(names.contains(&"Base+L_u+MK16".to_string()));
        assert!(names.contains(&"Base+L_u+GP256+MK16".to_string()));
        assert_eq!(names.iter().filter(|n| *n == "Base+L_u+GP128+MK16").count(), 1);
        assert_eq!(names.len(), 1 + 3 + 1 + 5 + 3);
    }

    #[test]
    fn stat_matches_hand_values() {
        let s = Stat::of(&[1.0, 2.0, 4.0]);
        assert!((s.mean - 7.0 / 3.0).abs() < 1e-15);
        let var = ((1.0f64 - 7.0 / 3.0).powi(2) + (2.0f64 - 7.0 / 3.0).powi(2) + (4.0f64 - 7.0 / 3.0).powi(2)) / 2.0;
        assert!((s.std - var.sqrt()).abs() < 1e-15);
        assert_eq!(Stat::of(&[3.0]).std, 0.0);
    }

    #[test]
    fn grid_serializes_cells_as_strings() {
        let text = toml::to_string(&GridSpec::default()).unwrap();
        assert!(text.contains("Base+L_u+GP128+MK16"), "{text}");
        assert_eq!(toml::from_str::<GridSpec>(&text).unwrap(), GridSpec::default());
    }
}
