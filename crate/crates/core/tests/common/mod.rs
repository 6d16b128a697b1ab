//! Synthetic corpora shared by the integration and acceptance suites.
#![allow(dead_code)]

use gloss::decoder::{BowDecoder, PosDecoder};
use gloss::latent::LatentStore;
use gloss::matrix::Matrix;
use gloss::{Decoder, Model, ModelKind, TrainConfig, Vocab};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];

/// `count` distinct pronounceable two-syllable words.
pub fn word_list(count: usize) -> Vec<String> {
    let mut words = Vec::with_capacity(count);
    'outer: for o1 in ONSETS {
        for v1 in VOWELS {
            for o2 in ONSETS {
                for v2 in VOWELS {
                    if words.len() == count {
                        break 'outer;
                    }
                    words.push(format!("{o1}{v1}{o2}{v2}"));
                }
            }
        }
    }
    assert_eq!(words.len(), count);
    words
}

/// `n` sentences of 4 to 10 words drawn uniformly from `vocab_words` words.
/// Every word is used at least once.
pub fn random_corpus(n: usize, vocab_words: usize, seed: u64) -> Vec<String> {
    let words = word_list(vocab_words);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sentences: Vec<Vec<&str>> = (0..n)
        .map(|_| {
            let len = rng.random_range(4..=10);
            (0..len)
                .map(|_| words.choose(&mut rng).unwrap().as_str())
                .collect()
        })
        .collect();
    // Plant any word the sampler missed.
    let used: std::collections::HashSet<&str> = sentences.iter().flatten().copied().collect();
    let mut slot = 0;
    for w in &words {
        if !used.contains(w.as_str()) {
            sentences[slot % n][0] = w.as_str();
            slot += 7;
        }
    }
    sentences.into_iter().map(|s| s.join(" ")).collect()
}

/// Paraphrase clusters: every member of a cluster shares the cluster's three
/// content words, arranged by one of several templates that share a small
/// pool of function words across all clusters.
pub fn paraphrase_clusters(clusters: usize, per_cluster: usize, seed: u64) -> Vec<Vec<String>> {
    let content = word_list(clusters * 3);
    let templates: &[&str] = &[
        "the {0} {1} the {2}",
        "a {0} will {1} some {2}",
        "{2} is what the {0} did {1}",
        "the {2} was {1} by a {0}",
        "did the {0} {1} it , the {2} ?",
        "some {0} can {1} that {2} .",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..clusters)
        .map(|c| {
            let w = &content[3 * c..3 * c + 3];
            let mut picks: Vec<usize> = (0..templates.len()).collect();
            for i in (1..picks.len()).rev() {
                picks.swap(i, rng.random_range(0..=i));
            }
            picks
                .iter()
                .take(per_cluster)
                .map(|&t| {
                    templates[t]
                        .replace("{0}", &w[0])
                        .replace("{1}", &w[1])
                        .replace("{2}", &w[2])
                })
                .collect()
        })
        .collect()
}

/// Matrix whose entries are exactly representable in f32.
fn f32_matrix(rows: usize, cols: usize, values: &[f32]) -> Matrix {
    let data = (0..rows * cols)
        .map(|i| values[i % values.len()] as f64)
        .collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// A model whose reals all survive a round trip through f32.
pub fn build_model(
    kind: ModelKind,
    dim: usize,
    extra_tokens: usize,
    max_len: usize,
    latents: usize,
    values: &[f32],
) -> Model {
    let mut tokens = vec!["<unk>".to_string()];
    tokens.extend((0..extra_tokens).map(|i| format!("tok{i}-é")));
    let vocab = Vocab::from_tokens(tokens).unwrap();
    let v = vocab.len();
    let weights = f32_matrix(v, dim, values);
    let bias = f32_matrix(1, v, &values[1..]).as_slice().to_vec();
    let decoder = match kind {
        ModelKind::Bow => Decoder::Bow(BowDecoder { weights, bias }),
        ModelKind::Pos => Decoder::Pos(PosDecoder {
            weights,
            bias,
            positions: f32_matrix(max_len, dim, &values[2..]),
        }),
    };
    // Entries in [-0.25, 0.25] keep every row well inside radius 2.
    let small: Vec<f32> = values.iter().map(|x| x / 4.0).collect();
    let latents = (latents > 0)
        .then(|| LatentStore::from_matrix(f32_matrix(latents, dim, &small), 2.0).unwrap());
    Model {
        vocab,
        decoder,
        latents,
        config: TrainConfig {
            kind,
            dim,
            radius: 2.0,
            max_len,
            ..TrainConfig::default()
        },
    }
}
