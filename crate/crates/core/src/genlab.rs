//! Generation from latents, interpolation on the ball and nearest-neighbour
//! lookup over the training codes.

use crate::decoder::Decoder;
use crate::error::{GlossError, Result};
use crate::eval::cosine;
use crate::latent::project_ball;
use crate::trainer::{infer_encoded, InferOptions, Model};

/// Argmax token ids for the first `length` positions.
pub fn greedy_decode(model: &Model, z: &[f64], length: usize) -> Result<Vec<usize>> {
    match &model.decoder {
        Decoder::Pos(dec) => dec.greedy(z, length),
        Decoder::Bow(_) => Err(GlossError::NotPositional),
    }
}

pub fn greedy_text(model: &Model, z: &[f64], length: usize) -> Result<String> {
    Ok(model.vocab.detokenize(&greedy_decode(model, z, length)?))
}

/// Linear blend `(1-t)·src + t·tgt` projected onto B(r).
///
/// Blend weights are formed so that swapping the endpoints and passing
/// `1.0 - t` yields bit-identical output.
pub fn interpolate(z_src: &[f64], z_tgt: &[f64], t: f64, radius: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&t) {
        return Err(GlossError::InvalidArgument(format!(
            "t = {t} outside [0, 1]"
        )));
    }
    if z_src.len() != z_tgt.len() {
        return Err(GlossError::ShapeMismatch(format!(
            "interpolating vectors with {} and {} entries",
            z_src.len(),
            z_tgt.len()
        )));
    }
    // 1 - x is exact for x in [0.5, 1], so derive the smaller weight from the
    // larger one.
    let (w_src, w_tgt) = if t >= 0.5 {
        (1.0 - t, t)
    } else {
        let u = 1.0 - t;
        (u, 1.0 - u)
    };
    let blend: Vec<f64> = z_src
        .iter()
        .zip(z_tgt)
        .map(|(a, b)| w_src * a + w_tgt * b)
        .collect();
    Ok(project_ball(&blend, radius))
}

/// The `points` interior values `k/(points+1)`.
pub fn interpolation_grid(points: usize) -> Vec<f64> {
    (1..=points)
        .map(|k| k as f64 / (points + 1) as f64)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedLine {
    pub label: String,
    pub tokens: Vec<usize>,
    pub text: String,
}

fn point_label(k: usize) -> String {
    match u8::try_from(k).ok().filter(|&k| k < 26) {
        Some(k) => format!("({})", (b'a' + k) as char),
        None => format!("({})", k + 1),
    }
}

/// Reconstructions of `src` and `tgt` with `points` decodes in between.
///
/// Both endpoints are embedded by inference. Interior points are decoded at
/// the source length; the target line uses the target's own length.
pub fn interpolation_lines(
    model: &Model,
    src: &str,
    tgt: &str,
    points: usize,
    opts: &InferOptions,
) -> Result<Vec<GeneratedLine>> {
    if !matches!(model.decoder, Decoder::Pos(_)) {
        return Err(GlossError::NotPositional);
    }
    let src_enc = model.encode(src)?;
    let tgt_enc = model.encode(tgt)?;
    let z_src = infer_encoded(model, &src_enc, opts)?;
    let z_tgt = infer_encoded(model, &tgt_enc, opts)?;
    let radius = model.config.radius;

    let line = |label: String, z: &[f64], len: usize| -> Result<GeneratedLine> {
        let tokens = greedy_decode(model, z, len)?;
        Ok(GeneratedLine {
            label,
            text: model.vocab.detokenize(&tokens),
            tokens,
        })
    };

    let mut lines = vec![line("src".into(), &z_src, src_enc.len())?];
    for (k, t) in interpolation_grid(points).into_iter().enumerate() {
        let z = interpolate(&z_src, &z_tgt, t, radius)?;
        lines.push(line(point_label(k), &z, src_enc.len())?);
    }
    lines.push(line("tgt".into(), &z_tgt, tgt_enc.len())?);
    Ok(lines)
}

/// Training-set indices ranked by descending cosine to `z` (ties by index).
/// Zero-norm training codes score 0.
pub fn nearest_neighbors(model: &Model, z: &[f64], k: usize) -> Result<Vec<(usize, f64)>> {
    let latents = model.latents()?;
    if k == 0 || k > latents.len() {
        return Err(GlossError::InvalidArgument(format!(
            "k = {k} outside 1..={}",
            latents.len()
        )));
    }
    if z.iter().all(|&x| x == 0.0) {
        return Err(GlossError::Degenerate("query latent is zero".into()));
    }
    let mut scored = (0..latents.len())
        .map(|i| match cosine(z, latents.row(i)) {
            Ok(c) => Ok((i, c)),
            Err(GlossError::Degenerate(_)) => Ok((i, 0.0)),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{EncodedCorpus, Vocab};
    use crate::decoder::ModelKind;
    use crate::matrix::norm;
    use crate::trainer::{train, TrainConfig};
    use proptest::prelude::*;

    fn small_model(kind: ModelKind) -> Model {
        let lines = [
            "one two three",
            "four five six",
            "seven eight nine ten",
            "two four six",
        ];
        let vocab = Vocab::build(&lines, 1).unwrap();
        let corpus = EncodedCorpus::encode(&lines, &vocab, 8).unwrap();
        let cfg = TrainConfig {
            kind,
            dim: 6,
            lr: 0.05,
            epochs: 3,
            batch_size: 2,
            max_len: 8,
            ..TrainConfig::default()
        };
        train(vocab, &corpus, cfg).unwrap().0
    }

    #[test]
    fn interpolate_examples() {
        let a = [2.0, 0.0];
        let b = [0.0, 2.0];
        assert_eq!(interpolate(&a, &b, 0.0, 2.0).unwrap(), a);
        assert_eq!(interpolate(&a, &b, 1.0, 2.0).unwrap(), b);
        assert_eq!(interpolate(&a, &b, 0.5, 2.0).unwrap(), [1.0, 1.0]);
        assert!(interpolate(&a, &b, 1.5, 2.0).is_err());
        assert!(interpolate(&a, &b, -0.1, 2.0).is_err());
        assert!(interpolate(&a, &[1.0], 0.1, 2.0).is_err());
    }

    #[test]
    fn grid_matches_four_points() {
        assert_eq!(interpolation_grid(4), [0.2, 0.4, 0.6, 0.8]);
    }

    #[test]
    fn bow_model_cannot_generate() {
        let model = small_model(ModelKind::Bow);
        let z = vec![0.1; 6];
        assert!(matches!(
            greedy_decode(&model, &z, 3),
            Err(GlossError::NotPositional)
        ));
        assert!(interpolation_lines(&model, "one", "two", 4, &InferOptions::default()).is_err());
    }

    #[test]
    fn greedy_on_zero_decoder_repeats_id_zero() {
        let mut model = small_model(ModelKind::Pos);
        if let Decoder::Pos(dec) = &mut model.decoder {
            dec.weights.fill(0.0);
            dec.bias.iter_mut().for_each(|b| *b = 0.0);
        }
        let out = greedy_decode(&model, &[0.3; 6], 5).unwrap();
        assert_eq!(out, [0; 5]);
        let again = greedy_decode(&model, &[0.3; 6], 5).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn interpolation_lines_shape() {
        let model = small_model(ModelKind::Pos);
        let opts = InferOptions {
            steps: 10,
            ..InferOptions::default()
        };
        let lines =
            interpolation_lines(&model, "one two three", "seven eight nine ten", 4, &opts).unwrap();
        let labels: Vec<&str> = lines.iter().map(|l| l.label.as_str()).collect();
        assert_eq!(labels, ["src", "(a)", "(b)", "(c)", "(d)", "tgt"]);
        assert_eq!(lines[0].tokens.len(), 3);
        assert_eq!(lines[2].tokens.len(), 3);
        assert_eq!(lines[5].tokens.len(), 4);
    }

    #[test]
    fn nearest_neighbors_rank_stored_latent_first() {
        let model = small_model(ModelKind::Bow);
        let latents = model.latents().unwrap();
        let n = latents.len();
        for i in 0..n {
            let hits = nearest_neighbors(&model, latents.row(i), n).unwrap();
            assert_eq!(hits[0].0, i);
            assert!((hits[0].1 - 1.0).abs() < 1e-12);
            let mut idx: Vec<usize> = hits.iter().map(|h| h.0).collect();
            idx.sort_unstable();
            assert_eq!(idx, (0..n).collect::<Vec<_>>());
        }
        assert!(nearest_neighbors(&model, latents.row(0), 0).is_err());
        assert!(nearest_neighbors(&model, latents.row(0), n + 1).is_err());
    }

    #[test]
    fn nearest_neighbors_match_brute_force() {
        use rand::{Rng, SeedableRng};
        let model = small_model(ModelKind::Bow);
        let latents = model.latents().unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let q: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let got = nearest_neighbors(&model, &q, latents.len()).unwrap();
            // Brute force: count how many rows beat each row.
            let scores: Vec<f64> = (0..latents.len())
                .map(|i| {
                    let r = latents.row(i);
                    r.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>() / (norm(r) * norm(&q))
                })
                .collect();
            for (rank, &(i, c)) in got.iter().enumerate() {
                let better = (0..scores.len())
                    .filter(|&j| {
                        scores[j] > scores[i] + 1e-12
                            || (j < i && (scores[j] - scores[i]).abs() <= 1e-12)
                    })
                    .count();
                assert_eq!(better, rank);
                assert!((c - scores[i]).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn interpolation_properties(
            a in prop::collection::vec(-1f64..1.0, 5),
            b in prop::collection::vec(-1f64..1.0, 5),
            t in 0f64..=1.0,
        ) {
            let r = 2.0;
            let (a, b) = (project_ball(&a, r), project_ball(&b, r));
            let ab = interpolate(&a, &b, t, r).unwrap();
            let ba = interpolate(&b, &a, 1.0 - t, r).unwrap();
            prop_assert_eq!(&ab, &ba);
            prop_assert!(norm(&ab) <= r);
        }
    }
}
