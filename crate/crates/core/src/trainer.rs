//! Joint optimization of the shared decoder and the per-sentence latents,
//! and inference of latents for unseen sentences with the decoder frozen.
//!
//! Each minibatch computes every example's loss and gradients against the
//! same (pre-update) parameters. The decoder then takes one Adam step on the
//! clipped batch-mean gradient, and every latent in the batch takes one Adam
//! step on its own clipped gradient followed by projection onto B(r).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{encode, EncodedCorpus, EncodedSentence, Vocab};
use crate::decoder::{Decoder, DecoderGrads, ModelKind};
use crate::error::{GlossError, Result};
use crate::latent::{project_ball_in_place, sample_latent, LatentStore};
use crate::matrix::{axpy, scale};
use crate::optim::{clip_global_norm, AdamState, BlockAdam};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub kind: ModelKind,
    pub dim: usize,
    pub radius: f64,
    pub lr: f64,
    pub clip: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub max_len: usize,
    /// Worker threads for per-example gradients; 1 is bit-deterministic.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            kind: ModelKind::Bow,
            dim: 100,
            radius: 2.0,
            lr: 3e-4,
            clip: 25.0,
            epochs: 210,
            batch_size: 128,
            seed: 0,
            max_len: 64,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive_int = [
            ("dim", self.dim),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("max_len", self.max_len),
            ("threads", self.threads),
        ];
        for (name, value) in positive_int {
            if value == 0 {
                return Err(GlossError::InvalidArgument(format!(
                    "{name} must be positive"
                )));
            }
        }
        let positive_real = [
            ("radius", self.radius),
            ("lr", self.lr),
            ("clip", self.clip),
        ];
        for (name, value) in positive_real {
            if !(value > 0.0 && value.is_finite()) {
                return Err(GlossError::InvalidArgument(format!(
                    "{name} must be positive"
                )));
            }
        }
        Ok(())
    }
}

/// A trained (or loaded) model.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub vocab: Vocab,
    pub decoder: Decoder,
    /// Codes of the training sentences; absent when a model file omits them.
    pub latents: Option<LatentStore>,
    pub config: TrainConfig,
}

impl Model {
    /// Checks that vocabulary, decoder, latents and config agree on shapes.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let mismatch = |what: String| Err(GlossError::ShapeMismatch(what));
        if self.vocab.len() != self.decoder.vocab_size() {
            return mismatch(format!(
                "vocabulary has {} tokens, decoder has {}",
                self.vocab.len(),
                self.decoder.vocab_size()
            ));
        }
        if self.decoder.dim() != self.config.dim {
            return mismatch(format!(
                "decoder dim {} != config dim {}",
                self.decoder.dim(),
                self.config.dim
            ));
        }
        if self.decoder.kind() != self.config.kind {
            return mismatch("decoder kind differs from config".into());
        }
        if let Some(p) = self.decoder.positions() {
            if p.rows() != self.config.max_len {
                return mismatch(format!(
                    "{} position embeddings for max length {}",
                    p.rows(),
                    self.config.max_len
                ));
            }
        }
        if let Some(latents) = &self.latents {
            if latents.dim() != self.config.dim {
                return mismatch(format!(
                    "latent dim {} != config dim {}",
                    latents.dim(),
                    self.config.dim
                ));
            }
            if latents.radius() != self.config.radius {
                return mismatch("latent radius differs from config".into());
            }
        }
        if !self.decoder.is_finite() {
            return Err(GlossError::InvalidModel(
                "non-finite decoder parameter".into(),
            ));
        }
        Ok(())
    }

    pub fn kind(&self) -> ModelKind {
        self.decoder.kind()
    }

    pub fn dim(&self) -> usize {
        self.decoder.dim()
    }

    pub fn encode(&self, sentence: &str) -> Result<EncodedSentence> {
        encode(sentence, &self.vocab, self.config.max_len)
    }

    pub fn reconstruction_loss(&self, z: &[f64], sentence: &EncodedSentence) -> Result<f64> {
        self.decoder.loss(z, sentence)
    }

    pub fn latents(&self) -> Result<&LatentStore> {
        self.latents
            .as_ref()
            .ok_or_else(|| GlossError::InvalidArgument("model has no stored latents".into()))
    }
}

/// State after one optimizer step, handed to step observers.
pub struct StepInfo<'a> {
    pub epoch: usize,
    /// Training-set indices whose latents were just updated.
    pub touched: &'a [usize],
    pub latents: &'a LatentStore,
    pub decoder: &'a Decoder,
    pub batch_loss: f64,
}

pub struct Trainer<'c> {
    corpus: &'c EncodedCorpus,
    cfg: TrainConfig,
    vocab: Vocab,
    decoder: Decoder,
    latents: LatentStore,
    decoder_opt: BlockAdam,
    latent_opt: Vec<AdamState>,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    epoch: usize,
    acc: DecoderGrads,
}

impl<'c> Trainer<'c> {
    pub fn new(vocab: Vocab, corpus: &'c EncodedCorpus, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if corpus.is_empty() {
            return Err(GlossError::EmptyCorpus);
        }
        for (i, s) in corpus.sentences.iter().enumerate() {
            if s.is_empty() {
                return Err(GlossError::Parse {
                    line: i + 1,
                    message: GlossError::EmptySentence.to_string(),
                });
            }
            if s.len() > cfg.max_len {
                return Err(GlossError::InvalidArgument(format!(
                    "sentence {} has {} tokens, max length is {}",
                    i + 1,
                    s.len(),
                    cfg.max_len
                )));
            }
            if let Some(&id) = s.ids.iter().find(|&&id| id >= vocab.len()) {
                return Err(GlossError::TokenOutOfRange {
                    id,
                    vocab_size: vocab.len(),
                });
            }
        }

        let decoder = Decoder::init(cfg.kind, vocab.len(), cfg.dim, cfg.max_len, cfg.seed);
        let latents = LatentStore::init(corpus.len(), cfg.dim, cfg.radius, cfg.seed)?;
        let acc = decoder.empty_grads();
        let block_lens: Vec<usize> = acc.blocks().iter().map(|b| b.len()).collect();
        Ok(Trainer {
            corpus,
            decoder_opt: BlockAdam::new(&block_lens),
            latent_opt: vec![AdamState::new(cfg.dim); corpus.len()],
            rng: ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1)),
            order: (0..corpus.len()).collect(),
            epoch: 0,
            vocab,
            decoder,
            latents,
            acc,
            cfg,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn decoder(&self) -> &Decoder {
        &self.decoder
    }

    pub fn latents(&self) -> &LatentStore {
        &self.latents
    }

    pub fn latent_steps(&self, i: usize) -> u64 {
        self.latent_opt[i].steps()
    }

    pub fn decoder_steps(&self) -> u64 {
        self.decoder_opt.states()[0].steps()
    }

    /// Mean per-sentence loss of the current parameters, without updating.
    pub fn evaluate(&self) -> Result<f64> {
        let mut total = 0.0;
        for (i, s) in self.corpus.sentences.iter().enumerate() {
            total += self.decoder.loss(self.latents.row(i), s)?;
        }
        Ok(total / self.corpus.len() as f64)
    }

    pub fn run_epoch(&mut self) -> Result<f64> {
        self.run_epoch_with(|_| {})
    }

    /// One pass over the shuffled corpus. Returns the mean per-sentence loss,
    /// each example's loss measured just before its batch's update.
    pub fn run_epoch_with(&mut self, mut on_step: impl FnMut(&StepInfo<'_>)) -> Result<f64> {
        let mut order = std::mem::take(&mut self.order);
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        for batch in order.chunks(self.cfg.batch_size) {
            let batch_loss = self.step_batch(batch)?;
            total += batch_loss;
            on_step(&StepInfo {
                epoch: self.epoch,
                touched: batch,
                latents: &self.latents,
                decoder: &self.decoder,
                batch_loss,
            });
        }
        self.order = order;
        self.epoch += 1;
        Ok(total / self.corpus.len() as f64)
    }

    fn step_batch(&mut self, batch: &[usize]) -> Result<f64> {
        let dim = self.cfg.dim;
        let workers = self.cfg.threads.min(batch.len());
        let mut latent_grads = vec![0.0; batch.len() * dim];
        let mut loss = 0.0;

        if workers <= 1 {
            self.acc.zero();
            for (&i, dz) in batch.iter().zip(latent_grads.chunks_exact_mut(dim)) {
                loss += self.decoder.accumulate(
                    self.latents.row(i),
                    &self.corpus.sentences[i],
                    &mut self.acc,
                    dz,
                )?;
            }
        } else {
            let chunk = batch.len().div_ceil(workers);
            let decoder = &self.decoder;
            let latents = &self.latents;
            let corpus = self.corpus;
            let partials: Vec<Result<(f64, DecoderGrads)>> = std::thread::scope(|scope| {
                let handles: Vec<_> = batch
                    .chunks(chunk)
                    .zip(latent_grads.chunks_mut(chunk * dim))
                    .map(|(ids, grads)| {
                        scope.spawn(move || {
                            let mut acc = decoder.empty_grads();
                            let mut loss = 0.0;
                            for (&i, dz) in ids.iter().zip(grads.chunks_exact_mut(dim)) {
                                loss += decoder.accumulate(
                                    latents.row(i),
                                    &corpus.sentences[i],
                                    &mut acc,
                                    dz,
                                )?;
                            }
                            Ok((loss, acc))
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("gradient worker panicked"))
                    .collect()
            });
            self.acc.zero();
            for partial in partials {
                let (l, acc) = partial?;
                loss += l;
                self.acc.add_assign(&acc);
            }
        }

        let inv = 1.0 / batch.len() as f64;
        for block in self.acc.blocks_mut() {
            scale(inv, block);
        }
        clip_global_norm(&mut self.acc.blocks_mut(), self.cfg.clip);
        self.decoder_opt.step(
            self.decoder.param_blocks_mut(),
            self.acc.blocks(),
            self.cfg.lr,
        )?;

        for (&i, dz) in batch.iter().zip(latent_grads.chunks_exact_mut(dim)) {
            clip_global_norm(&mut [dz], self.cfg.clip);
            self.latent_opt[i].step(self.latents.row_mut(i), dz, self.cfg.lr)?;
            self.latents.project_row(i);
        }
        Ok(loss)
    }

    pub fn into_model(self) -> Model {
        Model {
            vocab: self.vocab,
            decoder: self.decoder,
            latents: Some(self.latents),
            config: self.cfg,
        }
    }
}

/// Trains for `cfg.epochs` epochs and returns the model with its per-epoch
/// mean loss trace.
pub fn train(vocab: Vocab, corpus: &EncodedCorpus, cfg: TrainConfig) -> Result<(Model, Vec<f64>)> {
    train_with_progress(vocab, corpus, cfg, |_, _| {})
}

pub fn train_with_progress(
    vocab: Vocab,
    corpus: &EncodedCorpus,
    cfg: TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<(Model, Vec<f64>)> {
    let epochs = cfg.epochs;
    let mut trainer = Trainer::new(vocab, corpus, cfg)?;
    let mut trace = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let loss = trainer.run_epoch()?;
        on_epoch(epoch, loss);
        trace.push(loss);
    }
    Ok((trainer.into_model(), trace))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferOptions {
    pub steps: usize,
    pub lr: f64,
    /// Plain gradient descent instead of Adam.
    pub plain_sgd: bool,
}

impl Default for InferOptions {
    fn default() -> Self {
        InferOptions {
            steps: 250,
            lr: 1.0,
            plain_sgd: false,
        }
    }
}

/// 64-bit FNV-1a over the token ids; seeds the initial latent of a sentence.
pub fn sentence_seed(sentence: &EncodedSentence) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &id in &sentence.ids {
        for byte in (id as u64).to_le_bytes() {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    hash
}

/// Embeds `sentence` by optimizing a fresh latent against the frozen decoder.
pub fn infer_latent(model: &Model, sentence: &str, opts: &InferOptions) -> Result<Vec<f64>> {
    let encoded = model.encode(sentence)?;
    infer_encoded(model, &encoded, opts)
}

pub fn infer_encoded(
    model: &Model,
    sentence: &EncodedSentence,
    opts: &InferOptions,
) -> Result<Vec<f64>> {
    if !(opts.lr > 0.0 && opts.lr.is_finite()) {
        return Err(GlossError::InvalidArgument("lr must be positive".into()));
    }
    let dim = model.dim();
    let radius = model.config.radius;
    let mut rng = ChaCha8Rng::seed_from_u64(sentence_seed(sentence));
    let mut z = sample_latent(&mut rng, dim, radius);
    let mut dz = vec![0.0; dim];
    let mut adam = AdamState::new(dim);

    for _ in 0..opts.steps {
        model.decoder.latent_grad(&z, sentence, &mut dz)?;
        clip_global_norm(&mut [&mut dz], model.config.clip);
        if opts.plain_sgd {
            axpy(-opts.lr, &dz, &mut z);
        } else {
            adam.step(&mut z, &dz, opts.lr)?;
        }
        project_ball_in_place(&mut z, radius);
    }
    Ok(z)
}

/// Infers every sentence, spreading the work over `threads` workers. The
/// result does not depend on the thread count.
pub fn infer_many<S: AsRef<str> + Sync>(
    model: &Model,
    sentences: &[S],
    opts: &InferOptions,
    threads: usize,
) -> Result<Vec<Vec<f64>>> {
    let workers = threads.max(1).min(sentences.len().max(1));
    if workers == 1 {
        return sentences
            .iter()
            .map(|s| infer_latent(model, s.as_ref(), opts))
            .collect();
    }
    let chunk = sentences.len().div_ceil(workers);
    let parts: Vec<Result<Vec<Vec<f64>>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = sentences
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|s| infer_latent(model, s.as_ref(), opts))
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("inference worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(sentences.len());
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}
