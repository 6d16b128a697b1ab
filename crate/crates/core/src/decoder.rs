//! Linear decoders mapping a latent code back to a sentence.
//!
//! The bag-of-words decoder predicts word presence with independent
//! sigmoids and a summed binary cross-entropy. The positional decoder feeds
//! `z + p_l` through the same kind of linear map for every position `l`,
//! normalizes with a softmax and sums the per-position cross-entropies. Both
//! expose closed-form gradients with respect to every parameter block and the
//! latent code.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::EncodedSentence;
use crate::error::{GlossError, Result};
use crate::matrix::{axpy, Matrix};

/// Probability floor applied inside logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Bow,
    Pos,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Bow => "bow",
            ModelKind::Pos => "pos",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = GlossError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bow" => Ok(ModelKind::Bow),
            "pos" => Ok(ModelKind::Pos),
            other => Err(GlossError::InvalidArgument(format!(
                "unknown model kind {other:?} (expected bow or pos)"
            ))),
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Summed binary cross-entropy between probabilities `o` and 0/1 target `t`.
pub fn bow_loss(o: &[f64], t: &[f64]) -> f64 {
    o.iter()
        .zip(t)
        .map(|(&oj, &tj)| {
            -(tj * oj.max(PROB_FLOOR).ln() + (1.0 - tj) * (1.0 - oj).max(PROB_FLOOR).ln())
        })
        .sum()
}

/// Softmax with max-subtraction, written into `out`; returns `log Σ exp(x)`.
fn softmax_into(logits: &[f64], out: &mut [f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &x) in out.iter_mut().zip(logits) {
        *o = (x - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
    max + sum.ln()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; logits.len()];
    softmax_into(logits, &mut out);
    out
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Gradients of the decoder parameter blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderGrads {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    /// Present only for the positional decoder.
    pub positions: Option<Matrix>,
}

impl DecoderGrads {
    pub fn zero(&mut self) {
        self.weights.fill(0.0);
        self.bias.iter_mut().for_each(|x| *x = 0.0);
        if let Some(p) = &mut self.positions {
            p.fill(0.0);
        }
    }

    pub fn add_assign(&mut self, other: &DecoderGrads) {
        axpy(1.0, other.weights.as_slice(), self.weights.as_mut_slice());
        axpy(1.0, &other.bias, &mut self.bias);
        if let (Some(p), Some(q)) = (&mut self.positions, &other.positions) {
            axpy(1.0, q.as_slice(), p.as_mut_slice());
        }
    }

    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out = vec![self.weights.as_slice(), self.bias.as_slice()];
        if let Some(p) = &self.positions {
            out.push(p.as_slice());
        }
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![self.weights.as_mut_slice(), self.bias.as_mut_slice()];
        if let Some(p) = &mut self.positions {
            out.push(p.as_mut_slice());
        }
        out
    }
}

/// Gradients of one example's loss: decoder blocks plus the latent code.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub decoder: DecoderGrads,
    pub latent: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BowDecoder {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl BowDecoder {
    pub fn zeros(vocab_size: usize, dim: usize) -> Self {
        BowDecoder {
            weights: Matrix::zeros(vocab_size, dim),
            bias: vec![0.0; vocab_size],
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.weights.rows()
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    fn check_latent(&self, z: &[f64]) -> Result<()> {
        check_latent(z, self.dim())
    }

    /// Per-word presence probabilities `σ(Wz + b)`.
    pub fn forward(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_latent(z)?;
        let mut o = vec![0.0; self.vocab_size()];
        self.weights.affine_into(z, &self.bias, &mut o);
        o.iter_mut().for_each(|x| *x = sigmoid(*x));
        Ok(o)
    }

    pub fn loss(&self, z: &[f64], word_set: &[usize]) -> Result<f64> {
        check_ids(word_set, self.vocab_size())?;
        let o = self.forward(z)?;
        Ok(bow_loss(&o, &dense_target(word_set, self.vocab_size())))
    }

    pub fn empty_grads(&self) -> DecoderGrads {
        DecoderGrads {
            weights: Matrix::zeros(self.vocab_size(), self.dim()),
            bias: vec![0.0; self.vocab_size()],
            positions: None,
        }
    }

    /// Adds this example's decoder gradients into `acc`, writes `dL/dz` into
    /// `dz` and returns the loss.
    pub fn accumulate(
        &self,
        z: &[f64],
        word_set: &[usize],
        acc: &mut DecoderGrads,
        dz: &mut [f64],
    ) -> Result<f64> {
        self.backward(z, word_set, Some(acc), dz)
    }

    /// Loss and `dL/dz` only; decoder parameters are treated as constants.
    pub fn latent_grad(&self, z: &[f64], word_set: &[usize], dz: &mut [f64]) -> Result<f64> {
        self.backward(z, word_set, None, dz)
    }

    fn backward(
        &self,
        z: &[f64],
        word_set: &[usize],
        acc: Option<&mut DecoderGrads>,
        dz: &mut [f64],
    ) -> Result<f64> {
        check_latent(dz, self.dim())?;
        check_ids(word_set, self.vocab_size())?;
        let mut o = self.forward(z)?;
        let t = dense_target(word_set, self.vocab_size());
        let loss = bow_loss(&o, &t);

        // e = o - t, reusing the output buffer.
        for (oj, tj) in o.iter_mut().zip(&t) {
            *oj -= tj;
        }
        let e = o;
        if let Some(acc) = acc {
            acc.weights.add_outer(&e, z);
            axpy(1.0, &e, &mut acc.bias);
        }
        dz.iter_mut().for_each(|x| *x = 0.0);
        self.weights.add_transpose_mul(&e, dz);
        Ok(loss)
    }

    pub fn grads(&self, z: &[f64], word_set: &[usize]) -> Result<(f64, Gradients)> {
        let mut decoder = self.empty_grads();
        let mut latent = vec![0.0; self.dim()];
        let loss = self.accumulate(z, word_set, &mut decoder, &mut latent)?;
        Ok((loss, Gradients { decoder, latent }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosDecoder {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    /// Row `l` is the embedding added to the latent at position `l`.
    pub positions: Matrix,
}

impl PosDecoder {
    pub fn zeros(vocab_size: usize, dim: usize, max_len: usize) -> Self {
        PosDecoder {
            weights: Matrix::zeros(vocab_size, dim),
            bias: vec![0.0; vocab_size],
            positions: Matrix::zeros(max_len, dim),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.weights.rows()
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn max_len(&self) -> usize {
        self.positions.rows()
    }

    fn check_position(&self, position: usize) -> Result<()> {
        if position >= self.max_len() {
            return Err(GlossError::PositionOutOfRange {
                position,
                max_len: self.max_len(),
            });
        }
        Ok(())
    }

    fn check_sequence(&self, ids: &[usize]) -> Result<()> {
        if ids.len() > self.max_len() {
            return Err(GlossError::InvalidArgument(format!(
                "sequence of length {} exceeds max length {}",
                ids.len(),
                self.max_len()
            )));
        }
        check_ids(ids, self.vocab_size())
    }

    /// `W(z + p_l) + b`; `shifted` receives `z + p_l`.
    fn logits_into(&self, z: &[f64], position: usize, shifted: &mut [f64], logits: &mut [f64]) {
        for ((s, &zi), &pi) in shifted.iter_mut().zip(z).zip(self.positions.row(position)) {
            *s = zi + pi;
        }
        self.weights.affine_into(shifted, &self.bias, logits);
    }

    pub fn logits(&self, z: &[f64], position: usize) -> Result<Vec<f64>> {
        check_latent(z, self.dim())?;
        self.check_position(position)?;
        let mut shifted = vec![0.0; self.dim()];
        let mut logits = vec![0.0; self.vocab_size()];
        self.logits_into(z, position, &mut shifted, &mut logits);
        Ok(logits)
    }

    /// Word distribution at `position`.
    pub fn forward(&self, z: &[f64], position: usize) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(z, position)?))
    }

    pub fn loss(&self, z: &[f64], ids: &[usize]) -> Result<f64> {
        check_latent(z, self.dim())?;
        self.check_sequence(ids)?;
        let mut shifted = vec![0.0; self.dim()];
        let mut logits = vec![0.0; self.vocab_size()];
        let mut probs = vec![0.0; self.vocab_size()];
        let mut loss = 0.0;
        for (l, &id) in ids.iter().enumerate() {
            self.logits_into(z, l, &mut shifted, &mut logits);
            let lse = softmax_into(&logits, &mut probs);
            loss += lse - logits[id];
        }
        Ok(loss)
    }

    pub fn empty_grads(&self) -> DecoderGrads {
        DecoderGrads {
            weights: Matrix::zeros(self.vocab_size(), self.dim()),
            bias: vec![0.0; self.vocab_size()],
            positions: Some(Matrix::zeros(self.max_len(), self.dim())),
        }
    }

    /// Adds this example's decoder gradients into `acc`, writes `dL/dz` into
    /// `dz` and returns the summed cross-entropy.
    pub fn accumulate(
        &self,
        z: &[f64],
        ids: &[usize],
        acc: &mut DecoderGrads,
        dz: &mut [f64],
    ) -> Result<f64> {
        self.backward(z, ids, Some(acc), dz)
    }

    /// Loss and `dL/dz` only; decoder parameters are treated as constants.
    pub fn latent_grad(&self, z: &[f64], ids: &[usize], dz: &mut [f64]) -> Result<f64> {
        self.backward(z, ids, None, dz)
    }

    fn backward(
        &self,
        z: &[f64],
        ids: &[usize],
        mut acc: Option<&mut DecoderGrads>,
        dz: &mut [f64],
    ) -> Result<f64> {
        check_latent(z, self.dim())?;
        check_latent(dz, self.dim())?;
        self.check_sequence(ids)?;
        if acc.as_ref().is_some_and(|a| a.positions.is_none()) {
            return Err(GlossError::ShapeMismatch(
                "missing position gradients".into(),
            ));
        }

        let dim = self.dim();
        let mut shifted = vec![0.0; dim];
        let mut logits = vec![0.0; self.vocab_size()];
        let mut e = vec![0.0; self.vocab_size()];
        let mut back = vec![0.0; dim];
        dz.iter_mut().for_each(|x| *x = 0.0);
        let mut loss = 0.0;

        for (l, &id) in ids.iter().enumerate() {
            self.logits_into(z, l, &mut shifted, &mut logits);
            let lse = softmax_into(&logits, &mut e);
            loss += lse - logits[id];
            e[id] -= 1.0;

            back.iter_mut().for_each(|x| *x = 0.0);
            self.weights.add_transpose_mul(&e, &mut back);
            axpy(1.0, &back, dz);
            if let Some(acc) = acc.as_deref_mut() {
                acc.weights.add_outer(&e, &shifted);
                axpy(1.0, &e, &mut acc.bias);
                if let Some(p) = acc.positions.as_mut() {
                    axpy(1.0, &back, p.row_mut(l));
                }
            }
        }
        Ok(loss)
    }

    pub fn grads(&self, z: &[f64], ids: &[usize]) -> Result<(f64, Gradients)> {
        let mut decoder = self.empty_grads();
        let mut latent = vec![0.0; self.dim()];
        let loss = self.accumulate(z, ids, &mut decoder, &mut latent)?;
        Ok((loss, Gradients { decoder, latent }))
    }

    /// Argmax token at each of the first `length` positions.
    pub fn greedy(&self, z: &[f64], length: usize) -> Result<Vec<usize>> {
        if length == 0 || length > self.max_len() {
            return Err(GlossError::InvalidArgument(format!(
                "length must be in 1..={}",
                self.max_len()
            )));
        }
        (0..length)
            .map(|l| self.logits(z, l).map(|logits| argmax(&logits)))
            .collect()
    }
}

/// Either decoder variant.
#[derive(Debug, Clone, PartialEq)]
pub enum Decoder {
    Bow(BowDecoder),
    Pos(PosDecoder),
}

impl Decoder {
    /// Zero weights and bias. Position embeddings, when present, are drawn
    /// from N(0, 1/d) so positions are distinguishable from the first step.
    pub fn init(kind: ModelKind, vocab_size: usize, dim: usize, max_len: usize, seed: u64) -> Self {
        match kind {
            ModelKind::Bow => Decoder::Bow(BowDecoder::zeros(vocab_size, dim)),
            ModelKind::Pos => {
                let mut dec = PosDecoder::zeros(vocab_size, dim, max_len);
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
                let normal = Normal::new(0.0, 1.0 / (dim as f64).sqrt()).expect("finite std");
                dec.positions
                    .as_mut_slice()
                    .iter_mut()
                    .for_each(|p| *p = normal.sample(&mut rng));
                Decoder::Pos(dec)
            }
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Decoder::Bow(_) => ModelKind::Bow,
            Decoder::Pos(_) => ModelKind::Pos,
        }
    }

    pub fn vocab_size(&self) -> usize {
        match self {
            Decoder::Bow(d) => d.vocab_size(),
            Decoder::Pos(d) => d.vocab_size(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Decoder::Bow(d) => d.dim(),
            Decoder::Pos(d) => d.dim(),
        }
    }

    pub fn weights(&self) -> &Matrix {
        match self {
            Decoder::Bow(d) => &d.weights,
            Decoder::Pos(d) => &d.weights,
        }
    }

    pub fn bias(&self) -> &[f64] {
        match self {
            Decoder::Bow(d) => &d.bias,
            Decoder::Pos(d) => &d.bias,
        }
    }

    pub fn positions(&self) -> Option<&Matrix> {
        match self {
            Decoder::Bow(_) => None,
            Decoder::Pos(d) => Some(&d.positions),
        }
    }

    pub fn empty_grads(&self) -> DecoderGrads {
        match self {
            Decoder::Bow(d) => d.empty_grads(),
            Decoder::Pos(d) => d.empty_grads(),
        }
    }

    /// Reconstruction loss of `sentence` from `z`.
    pub fn loss(&self, z: &[f64], sentence: &EncodedSentence) -> Result<f64> {
        match self {
            Decoder::Bow(d) => d.loss(z, &sentence.word_set),
            Decoder::Pos(d) => d.loss(z, &sentence.ids),
        }
    }

    pub fn accumulate(
        &self,
        z: &[f64],
        sentence: &EncodedSentence,
        acc: &mut DecoderGrads,
        dz: &mut [f64],
    ) -> Result<f64> {
        match self {
            Decoder::Bow(d) => d.accumulate(z, &sentence.word_set, acc, dz),
            Decoder::Pos(d) => d.accumulate(z, &sentence.ids, acc, dz),
        }
    }

    /// Loss and gradient with respect to `z` only.
    pub fn latent_grad(
        &self,
        z: &[f64],
        sentence: &EncodedSentence,
        dz: &mut [f64],
    ) -> Result<f64> {
        match self {
            Decoder::Bow(d) => d.latent_grad(z, &sentence.word_set, dz),
            Decoder::Pos(d) => d.latent_grad(z, &sentence.ids, dz),
        }
    }

    pub fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Decoder::Bow(d) => vec![d.weights.as_mut_slice(), d.bias.as_mut_slice()],
            Decoder::Pos(d) => vec![
                d.weights.as_mut_slice(),
                d.bias.as_mut_slice(),
                d.positions.as_mut_slice(),
            ],
        }
    }

    pub fn is_finite(&self) -> bool {
        let finite = |s: &[f64]| s.iter().all(|x| x.is_finite());
        finite(self.weights().as_slice())
            && finite(self.bias())
            && self.positions().is_none_or(|p| finite(p.as_slice()))
    }
}

fn check_latent(z: &[f64], dim: usize) -> Result<()> {
    if z.len() != dim {
        return Err(GlossError::ShapeMismatch(format!(
            "latent has {} entries, decoder expects {dim}",
            z.len()
        )));
    }
    Ok(())
}

fn check_ids(ids: &[usize], vocab_size: usize) -> Result<()> {
    match ids.iter().find(|&&id| id >= vocab_size) {
        Some(&id) => Err(GlossError::TokenOutOfRange { id, vocab_size }),
        None => Ok(()),
    }
}

fn dense_target(word_set: &[usize], vocab_size: usize) -> Vec<f64> {
    let mut t = vec![0.0; vocab_size];
    for &id in word_set {
        t[id] = 1.0;
    }
    t
}
