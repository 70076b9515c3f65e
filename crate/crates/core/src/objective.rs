//! Training losses over a similarity matrix `D` (`T x C`).
//!
//! Every loss returns its value together with `dL/dD`; the model turns that
//! into parameter gradients. Losses are means over the participating points.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::scaled_softmax;
use crate::scenegen::{SplitSpec, UNLABELED};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    SeenOnly,
    SeenPlusPseudo,
    SeenPlusSelf,
    SeenPlusUnknownAware,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::SeenOnly,
        Variant::SeenPlusPseudo,
        Variant::SeenPlusSelf,
        Variant::SeenPlusUnknownAware,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::SeenOnly => "seen_only",
            Variant::SeenPlusPseudo => "seen_plus_pseudo",
            Variant::SeenPlusSelf => "seen_plus_self",
            Variant::SeenPlusUnknownAware => "seen_plus_unknown_aware",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown loss variant '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    /// Temperature divisor of the seen-class and pseudo-label cross-entropies.
    pub tau: f64,
    /// Temperature divisor of the unknown-aware term.
    pub tau_u: f64,
    /// Weight of the auxiliary term (unknown-aware, pseudo or self).
    pub weight_u: f64,
    pub variant: Variant,
    /// Evaluate the seen loss as `-log(mean_t p_t)` instead of `mean_t -log p_t`.
    pub literal_seen_form: bool,
    /// Weak-view confidence required for the consistency term.
    pub confidence: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            tau: 1.0,
            tau_u: 1.0,
            weight_u: 1.0,
            variant: Variant::SeenPlusUnknownAware,
            literal_seen_form: false,
            confidence: 0.8,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("loss.tau must be > 0, got {}", self.tau)));
        }
        if !(self.tau_u > 0.0 && self.tau_u.is_finite()) {
            return Err(Error::Config(format!("loss.tau_u must be > 0, got {}", self.tau_u)));
        }
        if !(self.weight_u >= 0.0 && self.weight_u.is_finite()) {
            return Err(Error::Config(format!("loss.weight_u must be >= 0, got {}", self.weight_u)));
        }
        if !self.confidence.is_finite() {
            return Err(Error::Config("loss.confidence must be finite".into()));
        }
        Ok(())
    }
}

/// Row partition of a similarity matrix into labeled seen points and
/// label-masked points.
#[derive(Debug, Clone)]
pub struct Batch<'a> {
    pub similarity: ArrayView2<'a, f64>,
    pub seen_rows: Vec<usize>,
    pub seen_labels: Vec<usize>,
    pub unseen_rows: Vec<usize>,
    pub split: &'a SplitSpec,
}

impl<'a> Batch<'a> {
    pub fn new(
        similarity: ArrayView2<'a, f64>,
        seen_rows: Vec<usize>,
        seen_labels: Vec<usize>,
        unseen_rows: Vec<usize>,
        split: &'a SplitSpec,
    ) -> Result<Self> {
        let (t, c) = similarity.dim();
        if c != split.class_count() {
            return Err(Error::shape("batch similarity (classes)", ("T", split.class_count()), (t, c)));
        }
        if seen_rows.len() != seen_labels.len() {
            return Err(Error::shape("seen rows vs labels", seen_rows.len(), seen_labels.len()));
        }
        let mut used = vec![false; t];
        for &r in seen_rows.iter().chain(&unseen_rows) {
            if r >= t {
                return Err(Error::Validation(format!("batch row {r} out of range for {t} points")));
            }
            if used[r] {
                return Err(Error::Validation(format!("batch row {r} appears twice")));
            }
            used[r] = true;
        }
        if let Some(&bad) = seen_labels.iter().find(|&&l| !split.is_seen(l)) {
            return Err(Error::Validation(format!("seen row carries non-seen class {bad}")));
        }
        Ok(Self {
            similarity,
            seen_rows,
            seen_labels,
            unseen_rows,
            split,
        })
    }

    /// Labeled rows become seen rows, `UNLABELED` rows become unseen rows.
    /// A label of an unseen class is rejected: it means the scene was not masked.
    pub fn from_labels(similarity: ArrayView2<'a, f64>, labels: &[i32], split: &'a SplitSpec) -> Result<Self> {
        if labels.len() != similarity.nrows() {
            return Err(Error::shape("batch labels", similarity.nrows(), labels.len()));
        }
        let mut seen_rows = Vec::new();
        let mut seen_labels = Vec::new();
        let mut unseen_rows = Vec::new();
        for (i, &l) in labels.iter().enumerate() {
            if l == UNLABELED {
                unseen_rows.push(i);
            } else if l >= 0 && split.is_seen(l as usize) {
                seen_rows.push(i);
                seen_labels.push(l as usize);
            } else {
                return Err(Error::Validation(format!(
                    "row {i} has label {l}, which is not a seen class; training data must be masked"
                )));
            }
        }
        Self::new(similarity, seen_rows, seen_labels, unseen_rows, split)
    }

    pub fn point_count(&self) -> usize {
        self.similarity.nrows()
    }

    pub fn class_count(&self) -> usize {
        self.similarity.ncols()
    }
}

/// A loss value with its gradient with respect to `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTerm {
    pub value: f64,
    pub grad: Array2<f64>,
    /// Set when the term degenerated (e.g. no participating points).
    pub warning: Option<String>,
}

impl LossTerm {
    fn empty(shape: (usize, usize), warning: &str) -> Self {
        Self {
            value: 0.0,
            grad: Array2::zeros(shape),
            warning: Some(warning.to_string()),
        }
    }
}

fn row_softmax(row: ArrayView1<'_, f64>, tau: f64) -> Result<Array1<f64>> {
    scaled_softmax(row, 1.0 / tau)
}

/// `log sum_c exp(row_c / tau)`, stabilized.
fn log_sum_exp(row: ArrayView1<'_, f64>, tau: f64) -> f64 {
    let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)) / tau;
    max + row.iter().map(|&v| (v / tau - max).exp()).sum::<f64>().ln()
}

/// Cross-entropy of the all-class softmax against `targets`, averaged over
/// `rows`.
fn cross_entropy(d: ArrayView2<'_, f64>, rows: &[usize], targets: &[usize], tau: f64) -> Result<LossTerm> {
    let n = rows.len() as f64;
    let mut grad = Array2::zeros(d.dim());
    let mut total = 0.0;
    for (&r, &y) in rows.iter().zip(targets) {
        let row = d.row(r);
        total += log_sum_exp(row, tau) - row[y] / tau;
        let mut g = row_softmax(row, tau)?;
        g[y] -= 1.0;
        grad.row_mut(r).assign(&(g / (tau * n)));
    }
    Ok(LossTerm {
        value: total / n,
        grad,
        warning: None,
    })
}

/// Seen-class InfoNCE: mean over seen points of `-log softmax(D_t / tau)[y_t]`,
/// normalized over all classes.
pub fn seen_loss(batch: &Batch<'_>, cfg: &LossConfig) -> Result<LossTerm> {
    let d = batch.similarity;
    if batch.seen_rows.is_empty() {
        return Ok(LossTerm::empty(d.dim(), "seen loss: batch has no seen points"));
    }
    if !cfg.literal_seen_form {
        return cross_entropy(d, &batch.seen_rows, &batch.seen_labels, cfg.tau);
    }
    // -log( mean_t p_t ),  p_t = softmax(D_t / tau)[y_t]
    let n = batch.seen_rows.len() as f64;
    let probs = batch
        .seen_rows
        .iter()
        .map(|&r| row_softmax(d.row(r), cfg.tau))
        .collect::<Result<Vec<_>>>()?;
    let mean_p: f64 = probs
        .iter()
        .zip(&batch.seen_labels)
        .map(|(q, &y)| q[y])
        .sum::<f64>()
        / n;
    let mut grad = Array2::zeros(d.dim());
    for ((&r, &y), q) in batch.seen_rows.iter().zip(&batch.seen_labels).zip(&probs) {
        let p = q[y];
        let mut g = q.mapv(|qc| p * qc);
        g[y] -= p;
        grad.row_mut(r).assign(&(g / (cfg.tau * n * mean_p)));
    }
    Ok(LossTerm {
        value: -mean_p.ln(),
        grad,
        warning: None,
    })
}

/// Unknown-aware loss: mean over masked points of the softmax mass
/// (temperature `tau_u`) placed on seen classes. No log.
pub fn unknown_aware_loss(batch: &Batch<'_>, cfg: &LossConfig) -> Result<LossTerm> {
    let d = batch.similarity;
    if batch.unseen_rows.is_empty() {
        return Ok(LossTerm::empty(d.dim(), "unknown-aware loss: batch has no unlabeled points"));
    }
    let seen = batch.split.seen_mask();
    let n = batch.unseen_rows.len() as f64;
    let mut grad = Array2::zeros(d.dim());
    // running mean: exact when every row has the same mass
    let mut mean = 0.0;
    for (i, &r) in batch.unseen_rows.iter().enumerate() {
        let row = d.row(r);
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite similarity in row {r}")));
        }
        // ratio of unnormalized sums, so uniform rows give exactly C_s / C
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let e = row.mapv(|v| ((v - max) / cfg.tau_u).exp());
        let z = e.sum();
        let s = e.iter().zip(&seen).filter(|(_, &m)| m).map(|(v, _)| v).sum::<f64>() / z;
        let q = e / z;
        mean += (s - mean) / (i + 1) as f64;
        let mut g = grad.row_mut(r);
        for c in 0..q.len() {
            let ind = if seen[c] { 1.0 } else { 0.0 };
            g[c] = q[c] * (ind - s) / (cfg.tau_u * n);
        }
    }
    Ok(LossTerm {
        value: mean,
        grad,
        warning: None,
    })
}

/// Index of the largest entry among `classes`; lowest index wins ties.
fn argmax_over(row: ArrayView1<'_, f64>, classes: impl IntoIterator<Item = usize>) -> Option<usize> {
    let mut best: Option<usize> = None;
    for c in classes {
        if best.is_none_or(|b| row[c] > row[b]) {
            best = Some(c);
        }
    }
    best
}

/// Pseudo-label baseline: label each masked point with its best unseen class
/// and apply the all-class cross-entropy. The argmax carries no gradient.
pub fn pseudo_label_loss(batch: &Batch<'_>, cfg: &LossConfig) -> Result<LossTerm> {
    let d = batch.similarity;
    if batch.unseen_rows.is_empty() {
        return Ok(LossTerm::empty(d.dim(), "pseudo-label loss: batch has no unlabeled points"));
    }
    if batch.split.unseen.is_empty() {
        return Ok(LossTerm::empty(d.dim(), "pseudo-label loss: split has no unseen classes"));
    }
    let targets = pseudo_labels(batch);
    cross_entropy(d, &batch.unseen_rows, &targets, cfg.tau)
}

/// Best unseen class for every masked row of `batch`.
pub fn pseudo_labels(batch: &Batch<'_>) -> Vec<usize> {
    batch
        .unseen_rows
        .iter()
        .map(|&r| argmax_over(batch.similarity.row(r), batch.split.unseen.iter().copied()).unwrap_or(0))
        .collect()
}

/// Consistency baseline. `weak` is the similarity matrix of a weakly
/// augmented view (no gradient); `strong` holds the strongly augmented view
/// with the same row order. Masked points whose weak-view confidence exceeds
/// `cfg.confidence` are trained towards their weak-view argmax. The sum over
/// confident points is divided by the number of masked points.
pub fn consistency_loss(weak: ArrayView2<'_, f64>, strong: &Batch<'_>, cfg: &LossConfig) -> Result<LossTerm> {
    let d = strong.similarity;
    if weak.dim() != d.dim() {
        return Err(Error::shape("weak view similarity", d.dim(), weak.dim()));
    }
    if strong.unseen_rows.is_empty() {
        return Ok(LossTerm::empty(d.dim(), "consistency loss: batch has no unlabeled points"));
    }
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for &r in &strong.unseen_rows {
        let q = row_softmax(weak.row(r), cfg.tau)?;
        let c = argmax_over(q.view(), 0..q.len()).unwrap_or(0);
        if q[c] > cfg.confidence {
            rows.push(r);
            targets.push(c);
        }
    }
    if rows.is_empty() {
        return Ok(LossTerm::empty(d.dim(), "consistency loss: no confident points"));
    }
    let mut term = cross_entropy(d, &rows, &targets, cfg.tau)?;
    let scale = rows.len() as f64 / strong.unseen_rows.len() as f64;
    term.value *= scale;
    term.grad *= scale;
    Ok(term)
}

/// Seen term plus weighted auxiliary term.
#[derive(Debug, Clone, PartialEq)]
pub struct TotalLoss {
    pub value: f64,
    pub seen: f64,
    /// Auxiliary term before weighting (0 for `SeenOnly`).
    pub auxiliary: f64,
    pub grad: Array2<f64>,
    pub warnings: Vec<String>,
}

/// `L_s + weight_u * L_aux` where the auxiliary term is chosen by
/// `cfg.variant`. `weak` is required by [`Variant::SeenPlusSelf`].
pub fn total_loss(batch: &Batch<'_>, cfg: &LossConfig, weak: Option<ArrayView2<'_, f64>>) -> Result<TotalLoss> {
    cfg.validate()?;
    let seen = seen_loss(batch, cfg)?;
    let aux = match cfg.variant {
        Variant::SeenOnly => None,
        Variant::SeenPlusUnknownAware => Some(unknown_aware_loss(batch, cfg)?),
        Variant::SeenPlusPseudo => Some(pseudo_label_loss(batch, cfg)?),
        Variant::SeenPlusSelf => {
            let weak = weak.ok_or_else(|| Error::Config("seen_plus_self needs a weak-view similarity".into()))?;
            Some(consistency_loss(weak, batch, cfg)?)
        }
    };
    let mut warnings: Vec<String> = seen.warning.into_iter().collect();
    let mut grad = seen.grad;
    let mut value = seen.value;
    let mut auxiliary = 0.0;
    if let Some(a) = aux {
        warnings.extend(a.warning);
        auxiliary = a.value;
        if cfg.weight_u != 0.0 {
            value += cfg.weight_u * a.value;
            grad.scaled_add(cfg.weight_u, &a.grad);
        }
    }
    if !value.is_finite() {
        return Err(Error::Numeric(format!("non-finite total loss {value}")));
    }
    Ok(TotalLoss {
        value,
        seen: seen.value,
        auxiliary,
        grad,
        warnings,
    })
}

/// Mean softmax mass (temperature `tau_u`) that the masked rows place on
/// seen classes; equals the unknown-aware loss value.
pub fn seen_mass(batch: &Batch<'_>, tau_u: f64) -> Result<f64> {
    let cfg = LossConfig {
        tau_u,
        ..LossConfig::default()
    };
    Ok(unknown_aware_loss(batch, &cfg)?.value)
}
