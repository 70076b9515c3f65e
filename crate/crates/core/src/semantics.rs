//! Per-class word embeddings.
//!
//! Tables come either from a text file (`name v1 v2 ... vE` per line, the
//! layout word2vec/GloVe exports use) or from a synthetic generator in which
//! embedding similarity follows primitive-mixture similarity.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{derive_seed, gaussian_matrix, seeded_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingSource {
    File,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub class_names: Vec<String>,
    /// `C x E`, row `c` is the embedding of `class_names[c]`.
    pub vectors: Array2<f64>,
    pub source: EmbeddingSource,
}

impl EmbeddingTable {
    pub fn new(class_names: Vec<String>, vectors: Array2<f64>, source: EmbeddingSource) -> Result<Self> {
        if class_names.len() != vectors.nrows() {
            return Err(Error::shape("embedding table", (class_names.len(), "E"), vectors.dim()));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("embedding table contains non-finite values".into()));
        }
        Ok(Self {
            class_names,
            vectors,
            source,
        })
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn class_count(&self) -> usize {
        self.vectors.nrows()
    }

    /// Scales every row to unit Euclidean norm (zero rows are left alone).
    pub fn normalized(mut self) -> Self {
        for mut row in self.vectors.rows_mut() {
            let n = row.dot(&row).sqrt();
            if n > 0.0 {
                row /= n;
            }
        }
        self
    }

    pub fn cosine_matrix(&self) -> Array2<f64> {
        let normed = self.clone().normalized();
        normed.vectors.dot(&normed.vectors.t())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, row) in self.class_names.iter().zip(self.vectors.rows()) {
            out.push_str(name);
            for v in row {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Parses the embedding text format and returns rows in `class_names` order.
/// Extra entries in the file are ignored.
pub fn parse_embeddings(text: &str, class_names: &[String], source: &str) -> Result<EmbeddingTable> {
    let mut found: HashMap<&str, Vec<f64>> = HashMap::new();
    let mut dim: Option<usize> = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let name = tokens.next().unwrap();
        let values = tokens
            .map(|t| {
                t.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                    location: format!("{source}:{}", i + 1),
                    message: format!("non-numeric token '{t}' in vector for '{name}'"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::Parse {
                    location: format!("{source}:{}", i + 1),
                    message: format!("ragged vector for '{name}': {} values, expected {d}", values.len()),
                })
            }
            _ => {}
        }
        found.insert(name, values);
    }
    let dim = dim.unwrap_or(0);
    if dim == 0 {
        return Err(Error::Parse {
            location: source.to_string(),
            message: "no embedding vectors found".into(),
        });
    }
    let mut vectors = Array2::zeros((class_names.len(), dim));
    for (c, name) in class_names.iter().enumerate() {
        let v = found
            .get(name.as_str())
            .ok_or_else(|| Error::Validation(format!("embedding file {source} has no entry for class '{name}'")))?;
        vectors.row_mut(c).assign(&Array1::from(v.clone()));
    }
    EmbeddingTable::new(class_names.to_vec(), vectors, EmbeddingSource::File)
}

/// Loads embeddings from a file. Vectors are kept as stored unless
/// `normalize` is set.
pub fn load_embeddings(path: &Path, class_names: &[String], normalize: bool) -> Result<EmbeddingTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let table = parse_embeddings(&text, class_names, &path.display().to_string())?;
    Ok(if normalize { table.normalized() } else { table })
}

pub fn write_embeddings(table: &EmbeddingTable, path: &Path) -> Result<()> {
    std::fs::write(path, table.to_text()).map_err(|e| Error::io(path, e))
}

/// `w_c = normalize(A m_c + eps_c)` with a fixed Gaussian `A` (`E x P`) and
/// per-class Gaussian noise `eps_c` of standard deviation `noise_sigma`.
pub fn synthesize_embeddings(
    mixtures: ArrayView2<'_, f64>,
    class_names: &[String],
    dim: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<EmbeddingTable> {
    let (classes, kinds) = mixtures.dim();
    if dim < kinds {
        return Err(Error::Config(format!(
            "embedding dimension {dim} is smaller than the {kinds} mixture components"
        )));
    }
    if class_names.len() != classes {
        return Err(Error::shape("class names vs mixtures", classes, class_names.len()));
    }
    for (c, row) in mixtures.rows().into_iter().enumerate() {
        if (row.sum() - 1.0).abs() > 1e-9 || row.iter().any(|&v| v < 0.0) {
            return Err(Error::Config(format!("mixture of class {c} is not a distribution")));
        }
    }
    let basis = gaussian_matrix(&mut seeded_rng(derive_seed(seed, "embedding-basis", 0)), dim, kinds, 1.0);
    let mut vectors = mixtures.dot(&basis.t());
    if noise_sigma > 0.0 {
        for (c, mut row) in vectors.rows_mut().into_iter().enumerate() {
            let noise = gaussian_matrix(
                &mut seeded_rng(derive_seed(seed, "embedding-noise", c as u64)),
                1,
                dim,
                noise_sigma,
            );
            row += &noise.row(0);
        }
    }
    Ok(EmbeddingTable::new(class_names.to_vec(), vectors, EmbeddingSource::Synthetic)?.normalized())
}
