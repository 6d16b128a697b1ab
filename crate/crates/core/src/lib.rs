//! Sentence embeddings by generative latent optimization.
//!
//! Every training sentence owns a free latent vector on the Euclidean ball
//! B(r). Latents and a shared linear decoder are fitted jointly to
//! reconstruct the sentences, either as a bag of words ([`decoder::BowDecoder`])
//! or word by word with learned position embeddings
//! ([`decoder::PosDecoder`]). Unseen sentences are embedded by optimizing a
//! fresh latent against the frozen decoder.

pub mod corpus;
pub mod decoder;
pub mod error;
pub mod eval;
pub mod genlab;
pub mod latent;
pub mod matrix;
pub mod optim;
pub mod persistence;
pub mod trainer;

pub use corpus::{encode, tokenize, EncodedCorpus, EncodedSentence, Vocab};
pub use decoder::{Decoder, ModelKind};
pub use error::{GlossError, Result};
pub use latent::{project_ball, LatentStore};
pub use trainer::{infer_latent, train, InferOptions, Model, TrainConfig, Trainer};
