//! Binary model files.
//!
//! Layout (all integers little-endian, reals IEEE-754 binary32):
//!
//! ```text
//! "GLOS"            4 bytes magic
//! version           u32 (= 1)
//! kind              u8  (0 = bow, 1 = pos)
//! d, V, L_max, N    u32 each
//! r                 f32
//! vocab             u32 count, then per token: u32 byte length + UTF-8 bytes
//! W                 V×d f32, row-major
//! b                 V f32
//! P                 L_max×d f32, row-major (pos only)
//! has_latents       u8 (0 or 1)
//! latents           N×d f32, row-major (only if has_latents = 1)
//! ```
//!
//! Parameters are held in `f64` in memory and rounded to `f32` on save.

use std::path::Path;

use crate::corpus::Vocab;
use crate::decoder::{BowDecoder, Decoder, ModelKind, PosDecoder};
use crate::error::{GlossError, Result};
use crate::latent::LatentStore;
use crate::matrix::Matrix;
use crate::trainer::{Model, TrainConfig};

pub const MAGIC: &[u8; 4] = b"GLOS";
pub const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v)
        .map_err(|_| GlossError::InvalidArgument(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_reals(out: &mut Vec<u8>, values: &[f64]) {
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

pub fn to_bytes(model: &Model) -> Result<Vec<u8>> {
    model.validate()?;
    let cfg = &model.config;
    let dec = &model.decoder;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(match dec.kind() {
        ModelKind::Bow => 0,
        ModelKind::Pos => 1,
    });
    put_u32(&mut out, dec.dim())?;
    put_u32(&mut out, dec.vocab_size())?;
    put_u32(&mut out, cfg.max_len)?;
    put_u32(&mut out, model.latents.as_ref().map_or(0, LatentStore::len))?;
    out.extend_from_slice(&(cfg.radius as f32).to_le_bytes());

    put_u32(&mut out, model.vocab.len())?;
    for tok in model.vocab.tokens() {
        put_u32(&mut out, tok.len())?;
        out.extend_from_slice(tok.as_bytes());
    }

    put_reals(&mut out, dec.weights().as_slice());
    put_reals(&mut out, dec.bias());
    if let Some(p) = dec.positions() {
        put_reals(&mut out, p.as_slice());
    }
    match &model.latents {
        Some(latents) => {
            out.push(1);
            put_reals(&mut out, latents.codes().as_slice());
        }
        None => out.push(0),
    }
    Ok(out)
}

/// Writes the model to `path`; a partially written file is removed.
pub fn save(model: &Model, path: &Path) -> Result<()> {
    let bytes = to_bytes(model)?;
    if let Err(e) = std::fs::write(path, &bytes) {
        let _ = std::fs::remove_file(path);
        return Err(GlossError::io(path, e));
    }
    Ok(())
}

pub fn load(path: &Path) -> Result<Model> {
    let bytes = std::fs::read(path).map_err(|e| GlossError::io(path, e))?;
    from_bytes(&bytes)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(GlossError::UnexpectedEof)?;
        let slice = self
            .buf
            .get(self.pos..end)
            .ok_or(GlossError::UnexpectedEof)?;
        self.pos = end;
        Ok(slice)
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn f32(&mut self) -> Result<f64> {
        let b = self.take(4)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
    }

    fn reals(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        let count = rows.checked_mul(cols).ok_or(GlossError::UnexpectedEof)?;
        if count.saturating_mul(4) > self.remaining() {
            return Err(GlossError::UnexpectedEof);
        }
        let data = self
            .take(count * 4)?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        Matrix::from_vec(rows, cols, data)
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic = r.take(4).map_err(|_| GlossError::BadHeader)?;
    if magic != MAGIC {
        return Err(GlossError::BadHeader);
    }
    if r.u32().map_err(|_| GlossError::BadHeader)? != VERSION as usize {
        return Err(GlossError::BadHeader);
    }
    let kind = match r.u8()? {
        0 => ModelKind::Bow,
        1 => ModelKind::Pos,
        other => {
            return Err(GlossError::InvalidModel(format!(
                "unknown model kind byte {other}"
            )))
        }
    };
    let dim = r.u32()?;
    let vocab_size = r.u32()?;
    let max_len = r.u32()?;
    let count = r.u32()?;
    let radius = r.f32()?;
    if dim == 0 || vocab_size == 0 || max_len == 0 {
        return Err(GlossError::InvalidModel("zero dimension in header".into()));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(GlossError::InvalidModel(format!("invalid radius {radius}")));
    }

    let token_count = r.u32()?;
    if token_count != vocab_size {
        return Err(GlossError::InvalidModel(format!(
            "header says V = {vocab_size}, vocabulary section has {token_count} tokens"
        )));
    }
    let mut tokens = Vec::with_capacity(token_count.min(r.remaining() / 4));
    for i in 0..token_count {
        let len = r.u32()?;
        let raw = r.take(len)?;
        let tok = std::str::from_utf8(raw)
            .map_err(|_| GlossError::InvalidModel(format!("token {i} is not valid UTF-8")))?;
        tokens.push(tok.to_string());
    }
    let vocab = Vocab::from_tokens(tokens)?;

    let weights = r.reals(vocab_size, dim)?;
    let bias = r.reals(1, vocab_size)?.as_slice().to_vec();
    let decoder = match kind {
        ModelKind::Bow => Decoder::Bow(BowDecoder { weights, bias }),
        ModelKind::Pos => Decoder::Pos(PosDecoder {
            weights,
            bias,
            positions: r.reals(max_len, dim)?,
        }),
    };

    let latents = match r.u8()? {
        0 => None,
        1 => Some(LatentStore::from_matrix(r.reals(count, dim)?, radius)?),
        other => {
            return Err(GlossError::InvalidModel(format!(
                "invalid latent flag {other}"
            )));
        }
    };
    if r.remaining() != 0 {
        return Err(GlossError::InvalidModel(format!(
            "{} trailing bytes",
            r.remaining()
        )));
    }

    let model = Model {
        vocab,
        decoder,
        latents,
        config: TrainConfig {
            kind,
            dim,
            radius,
            max_len,
            ..TrainConfig::default()
        },
    };
    model.validate()?;
    Ok(model)
}

/// The model exactly as `load` would return it after `save`: every real
/// rounded through `f32`, and config fields that are not stored reset to
/// their defaults.
pub fn as_stored(model: &Model) -> Result<Model> {
    from_bytes(&to_bytes(model)?)
}
