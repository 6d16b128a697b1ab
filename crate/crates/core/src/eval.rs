//! Similarity scoring against gold judgements and a logistic-regression probe
//! on frozen embeddings.

use std::path::Path;

use crate::decoder::{argmax, softmax};
use crate::error::{GlossError, Result};
use crate::matrix::{dot, norm, Matrix};
use crate::trainer::{infer_many, InferOptions, Model};

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(GlossError::ShapeMismatch(format!(
            "cosine of vectors with {} and {} entries",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(GlossError::Degenerate("cosine of a zero vector".into()));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(GlossError::ShapeMismatch(format!(
            "pearson of sequences with {} and {} entries",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(GlossError::Degenerate("need at least 2 pairs".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(GlossError::Degenerate(
            "constant sequence has no correlation".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Probability that a random positive outscores a random negative (ties
/// count one half).
pub fn ranking_auc(positives: &[f64], negatives: &[f64]) -> Result<f64> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(GlossError::Degenerate(
            "auc needs both positives and negatives".into(),
        ));
    }
    let mut neg = negatives.to_vec();
    neg.sort_by(f64::total_cmp);
    let mut wins = 0.0;
    for &p in positives {
        let below = neg.partition_point(|&n| n < p);
        let not_above = neg.partition_point(|&n| n <= p);
        wins += below as f64 + 0.5 * (not_above - below) as f64;
    }
    Ok(wins / (positives.len() * negatives.len()) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StsPair {
    pub sent_a: String,
    pub sent_b: String,
    pub gold: f64,
}

/// Parses `sent_a<TAB>sent_b<TAB>score` lines. Empty lines are skipped.
pub fn parse_sts(text: &str) -> Result<Vec<StsPair>> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| GlossError::Parse {
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(err(format!(
                "expected 3 tab-separated fields, found {}",
                fields.len()
            )));
        }
        let gold: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| err(format!("unparseable score {:?}", fields[2])))?;
        if !gold.is_finite() {
            return Err(err(format!("non-finite score {:?}", fields[2])));
        }
        if fields[0].trim().is_empty() || fields[1].trim().is_empty() {
            return Err(err("empty sentence".into()));
        }
        pairs.push(StsPair {
            sent_a: fields[0].to_string(),
            sent_b: fields[1].to_string(),
            gold,
        });
    }
    Ok(pairs)
}

pub fn read_sts_file(path: &Path) -> Result<Vec<StsPair>> {
    let text = std::fs::read_to_string(path).map_err(|e| GlossError::io(path, e))?;
    parse_sts(&text)
}

/// Raw Pearson correlation in [-1, 1] between embedding cosines and golds.
pub fn sts_correlation(
    model: &Model,
    pairs: &[StsPair],
    opts: &InferOptions,
    threads: usize,
) -> Result<f64> {
    if pairs.len() < 2 {
        return Err(GlossError::Degenerate("need at least 2 pairs".into()));
    }
    let sentences: Vec<&str> = pairs
        .iter()
        .flat_map(|p| [p.sent_a.as_str(), p.sent_b.as_str()])
        .collect();
    let embeddings = infer_many(model, &sentences, opts, threads)?;
    let scores = embeddings
        .chunks_exact(2)
        .map(|pair| cosine(&pair[0], &pair[1]))
        .collect::<Result<Vec<f64>>>()?;
    let golds: Vec<f64> = pairs.iter().map(|p| p.gold).collect();
    pearson(&scores, &golds)
}

/// Pearson × 100, the reporting convention for STS benchmarks.
pub fn eval_sts(
    model: &Model,
    pairs: &[StsPair],
    opts: &InferOptions,
    threads: usize,
) -> Result<f64> {
    Ok(100.0 * sts_correlation(model, pairs, opts, threads)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeDataset {
    pub embeddings: Matrix,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl ProbeDataset {
    pub fn new(embeddings: Matrix, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if embeddings.rows() != labels.len() {
            return Err(GlossError::ShapeMismatch(format!(
                "{} embeddings for {} labels",
                embeddings.rows(),
                labels.len()
            )));
        }
        if labels.is_empty() {
            return Err(GlossError::Degenerate("probe dataset is empty".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(GlossError::InvalidArgument(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        Ok(ProbeDataset {
            embeddings,
            labels,
            classes,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>, classes: usize) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(GlossError::ShapeMismatch("ragged embedding rows".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::new(Matrix::from_vec(rows.len(), dim, data)?, labels, classes)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.cols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    pub l2: f64,
    pub steps: usize,
    pub lr: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            l2: 1e-3,
            steps: 1000,
            lr: 0.1,
        }
    }
}

/// Multinomial logistic regression: `weights` is C×d, `bias` has C entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeModel {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl ProbeModel {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        ProbeModel {
            weights: Matrix::zeros(classes, dim),
            bias: vec![0.0; classes],
        }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.bias.len()];
        self.weights.affine_into(x, &self.bias, &mut out);
        out
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.logits(x))
    }
}

/// Mean cross-entropy plus `l2/2 · ‖W‖²` (bias unpenalized), with its
/// gradient.
pub fn probe_objective(model: &ProbeModel, data: &ProbeDataset, l2: f64) -> (f64, ProbeModel) {
    let (classes, dim) = (model.bias.len(), data.dim());
    let mut grad = ProbeModel::zeros(classes, dim);
    let data_loss = cross_entropy_grad(model, data, &mut grad);
    let penalty = 0.5 * l2 * model.weights.as_slice().iter().map(|w| w * w).sum::<f64>();
    for (g, w) in grad
        .weights
        .as_mut_slice()
        .iter_mut()
        .zip(model.weights.as_slice())
    {
        *g += l2 * w;
    }
    (data_loss + penalty, grad)
}

fn cross_entropy_grad(model: &ProbeModel, data: &ProbeDataset, grad: &mut ProbeModel) -> f64 {
    let n = data.len() as f64;
    let mut loss = 0.0;
    for (i, &label) in data.labels.iter().enumerate() {
        let x = data.embeddings.row(i);
        let mut p = softmax(&model.logits(x));
        loss -= p[label].max(1e-300).ln();
        p[label] -= 1.0;
        p.iter_mut().for_each(|v| *v /= n);
        grad.weights.add_outer(&p, x);
        for (g, e) in grad.bias.iter_mut().zip(&p) {
            *g += e;
        }
    }
    loss / n
}

/// Full-batch proximal gradient descent from zero: a gradient step on the
/// cross-entropy, then the exact proximal step for the L2 penalty
/// (`W ← W / (1 + lr·l2)`), which stays stable for any penalty strength.
pub fn probe_train(data: &ProbeDataset, cfg: &ProbeConfig) -> Result<ProbeModel> {
    probe_train_traced(data, cfg, |_, _| {})
}

/// As [`probe_train`], reporting the objective before every step.
pub fn probe_train_traced(
    data: &ProbeDataset,
    cfg: &ProbeConfig,
    mut on_step: impl FnMut(usize, f64),
) -> Result<ProbeModel> {
    if !(cfg.l2 >= 0.0 && cfg.l2.is_finite()) {
        return Err(GlossError::InvalidArgument(
            "l2 must be non-negative".into(),
        ));
    }
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(GlossError::InvalidArgument("lr must be positive".into()));
    }
    let mut present = vec![false; data.classes];
    for &l in &data.labels {
        present[l] = true;
    }
    if data.classes < 2 || present.iter().filter(|&&p| p).count() < 2 {
        return Err(GlossError::Degenerate(
            "probe training needs at least two classes".into(),
        ));
    }
    if let Some(missing) = present.iter().position(|&p| !p) {
        return Err(GlossError::Degenerate(format!(
            "class {missing} has no training examples"
        )));
    }

    let mut model = ProbeModel::zeros(data.classes, data.dim());
    let mut grad = ProbeModel::zeros(data.classes, data.dim());
    let shrink = 1.0 / (1.0 + cfg.lr * cfg.l2);
    for step in 0..cfg.steps {
        grad.weights.fill(0.0);
        grad.bias.iter_mut().for_each(|g| *g = 0.0);
        let ce = cross_entropy_grad(&model, data, &mut grad);
        let penalty = 0.5 * cfg.l2 * model.weights.as_slice().iter().map(|w| w * w).sum::<f64>();
        on_step(step, ce + penalty);

        for (w, g) in model
            .weights
            .as_mut_slice()
            .iter_mut()
            .zip(grad.weights.as_slice())
        {
            *w = (*w - cfg.lr * g) * shrink;
        }
        for (b, g) in model.bias.iter_mut().zip(&grad.bias) {
            *b -= cfg.lr * g;
        }
    }
    Ok(model)
}

/// Fraction of rows whose argmax prediction (ties to the lowest class)
/// equals the label.
pub fn probe_eval(model: &ProbeModel, data: &ProbeDataset) -> Result<f64> {
    if model.weights.cols() != data.dim() {
        return Err(GlossError::ShapeMismatch(format!(
            "probe expects {} dims, data has {}",
            model.weights.cols(),
            data.dim()
        )));
    }
    let correct = data
        .labels
        .iter()
        .enumerate()
        .filter(|&(i, &label)| model.predict(data.embeddings.row(i)) == label)
        .count();
    Ok(correct as f64 / data.len() as f64)
}

/// Parses `label<TAB>sentence` lines with non-negative integer labels.
pub fn parse_probe(text: &str) -> Result<Vec<(usize, String)>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| GlossError::Parse {
            line: i + 1,
            message,
        };
        let (label, sentence) = line
            .split_once('\t')
            .ok_or_else(|| err("expected label<TAB>sentence".into()))?;
        let label: usize = label
            .trim()
            .parse()
            .map_err(|_| err(format!("unparseable label {label:?}")))?;
        if sentence.trim().is_empty() {
            return Err(err("empty sentence".into()));
        }
        rows.push((label, sentence.to_string()));
    }
    Ok(rows)
}

pub fn read_probe_file(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| GlossError::io(path, e))?;
    parse_probe(&text)
}
