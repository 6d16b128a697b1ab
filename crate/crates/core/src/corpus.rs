//! Tokenization, vocabulary construction and sentence encoding.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{GlossError, Result};

pub const UNK_ID: usize = 0;
pub const UNK_TOKEN: &str = "<unk>";

/// Lowercases `text` and splits it into word and punctuation tokens.
///
/// A word is a run of alphanumeric characters; a `-` or `'` directly between
/// two alphanumerics stays inside the word (`well-known`, `don't`). Every
/// other non-whitespace character becomes a token of its own.
pub fn tokenize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let chars: Vec<char> = lowered.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();

    for (i, &c) in chars.iter().enumerate() {
        let joiner = (c == '-' || c == '\'')
            && !current.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
        if c.is_alphanumeric() || joiner {
            current.push(c);
        } else {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            if !c.is_whitespace() {
                tokens.push(c.to_string());
            }
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Token ↔ id bijection. Id 0 is always the unknown-word token.
#[derive(Debug, Clone)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    counts: Vec<u64>,
}

impl Vocab {
    /// Counts tokens over `corpus`, drops those seen fewer than `min_count`
    /// times and assigns ids by descending count, ties broken by the token
    /// string. The unknown token's count is the number of dropped occurrences.
    pub fn build<S: AsRef<str>>(corpus: &[S], min_count: u64) -> Result<Vocab> {
        if min_count < 1 {
            return Err(GlossError::InvalidArgument(
                "min_count must be at least 1".into(),
            ));
        }
        let mut counts: HashMap<String, u64> = HashMap::new();
        for line in corpus {
            for tok in tokenize(line.as_ref()) {
                *counts.entry(tok).or_default() += 1;
            }
        }
        if counts.is_empty() {
            return Err(GlossError::EmptyCorpus);
        }

        let mut dropped = 0;
        let mut kept: Vec<(String, u64)> = Vec::with_capacity(counts.len());
        for (tok, c) in counts {
            if c >= min_count && tok != UNK_TOKEN {
                kept.push((tok, c));
            } else {
                dropped += c;
            }
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let mut tokens = vec![UNK_TOKEN.to_string()];
        let mut token_counts = vec![dropped];
        for (tok, c) in kept {
            tokens.push(tok);
            token_counts.push(c);
        }
        Ok(Self::assemble(tokens, token_counts))
    }

    /// Rebuilds a vocabulary from its ordered token list (counts unknown, set
    /// to zero). Fails unless id 0 is the unknown token and tokens are unique.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Vocab> {
        if tokens.first().map(String::as_str) != Some(UNK_TOKEN) {
            return Err(GlossError::InvalidModel(format!(
                "vocabulary must start with {UNK_TOKEN}"
            )));
        }
        let n = tokens.len();
        let vocab = Self::assemble(tokens, vec![0; n]);
        if vocab.index.len() != n {
            return Err(GlossError::InvalidModel(
                "duplicate token in vocabulary".into(),
            ));
        }
        Ok(vocab)
    }

    fn assemble(tokens: Vec<String>, counts: Vec<u64>) -> Vocab {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab {
            tokens,
            index,
            counts,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// Always false: the unknown token is always present.
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> usize {
        self.id(token).unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn count(&self, id: usize) -> Option<u64> {
        self.counts.get(id).copied()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Joins the tokens for `ids` with single spaces.
    pub fn detokenize(&self, ids: &[usize]) -> String {
        ids.iter()
            .map(|&id| self.token(id).unwrap_or(UNK_TOKEN))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl PartialEq for Vocab {
    fn eq(&self, other: &Self) -> bool {
        self.tokens == other.tokens
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSentence {
    pub ids: Vec<usize>,
    /// Sorted, deduplicated `ids`: the multi-hot target in sparse form.
    pub word_set: Vec<usize>,
}

impl EncodedSentence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Dense 0/1 target of length `vocab_size`.
    pub fn multi_hot(&self, vocab_size: usize) -> Vec<f64> {
        let mut t = vec![0.0; vocab_size];
        for &id in &self.word_set {
            t[id] = 1.0;
        }
        t
    }
}

pub fn encode(sentence: &str, vocab: &Vocab, max_len: usize) -> Result<EncodedSentence> {
    if max_len < 1 {
        return Err(GlossError::InvalidArgument(
            "max_len must be at least 1".into(),
        ));
    }
    let mut ids: Vec<usize> = tokenize(sentence)
        .iter()
        .map(|t| vocab.id_or_unk(t))
        .collect();
    if ids.is_empty() {
        return Err(GlossError::EmptySentence);
    }
    ids.truncate(max_len);
    let mut word_set = ids.clone();
    word_set.sort_unstable();
    word_set.dedup();
    Ok(EncodedSentence { ids, word_set })
}

#[derive(Debug, Clone)]
pub struct EncodedCorpus {
    pub sentences: Vec<EncodedSentence>,
    pub raw: Vec<String>,
}

impl EncodedCorpus {
    /// Encodes every line; a line that yields no tokens is reported by its
    /// 1-based position.
    pub fn encode<S: AsRef<str>>(lines: &[S], vocab: &Vocab, max_len: usize) -> Result<Self> {
        if lines.is_empty() {
            return Err(GlossError::EmptyCorpus);
        }
        let mut sentences = Vec::with_capacity(lines.len());
        for (i, line) in lines.iter().enumerate() {
            let enc = encode(line.as_ref(), vocab, max_len).map_err(|e| match e {
                GlossError::EmptySentence => GlossError::Parse {
                    line: i + 1,
                    message: e.to_string(),
                },
                other => other,
            })?;
            sentences.push(enc);
        }
        Ok(EncodedCorpus {
            sentences,
            raw: lines.iter().map(|s| s.as_ref().to_string()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

/// Reads a one-sentence-per-line UTF-8 file, skipping blank lines.
pub fn read_corpus_file(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| GlossError::io(path, e))?;
    Ok(text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_string)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tokenize_examples() {
        assert_eq!(
            tokenize("John eats a sandwich."),
            ["john", "eats", "a", "sandwich", "."]
        );
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("A  a\ta"), ["a", "a", "a"]);
    }

    // Expected values frozen from an independent regex-based reference tokenizer.
    #[test]
    fn tokenize_matches_reference() {
        assert_eq!(tokenize("zzz-unseen-token"), ["zzz-unseen-token"]);
        assert_eq!(
            tokenize("Don't stop -- now!"),
            ["don't", "stop", "-", "-", "now", "!"]
        );
        assert_eq!(
            tokenize("well-known, 'quoted' end-"),
            ["well-known", ",", "'", "quoted", "'", "end", "-"]
        );
        assert_eq!(tokenize("Ünïcode ÉTÉ"), ["ünïcode", "été"]);
        assert_eq!(tokenize("a_b"), ["a", "_", "b"]);
    }

    #[test]
    fn build_vocab_orders_by_count() {
        let v = Vocab::build(&["a b", "a"], 1).unwrap();
        assert_eq!(v.tokens(), [UNK_TOKEN, "a", "b"]);
        assert_eq!(v.count(1), Some(2));

        let v = Vocab::build(&["a b", "a"], 2).unwrap();
        assert_eq!(v.tokens(), [UNK_TOKEN, "a"]);
        assert_eq!(v.count(UNK_ID), Some(1));
    }

    #[test]
    fn build_vocab_ties_are_lexicographic() {
        let v = Vocab::build(&["c b a", "b c a"], 1).unwrap();
        assert_eq!(v.tokens(), [UNK_TOKEN, "a", "b", "c"]);
    }

    #[test]
    fn build_vocab_rejects_empty() {
        assert!(matches!(
            Vocab::build(&[""], 1),
            Err(GlossError::EmptyCorpus)
        ));
        assert!(matches!(
            Vocab::build::<&str>(&[], 1),
            Err(GlossError::EmptyCorpus)
        ));
        assert!(Vocab::build(&["a"], 0).is_err());
    }

    #[test]
    fn encode_collapses_duplicates() {
        let v = Vocab::build(&["the cat the mat"], 1).unwrap();
        let e = encode("the cat the mat", &v, 64).unwrap();
        assert_eq!(e.ids.len(), 4);
        assert_eq!(e.word_set.len(), 3);
    }

    #[test]
    fn encode_single_and_unknown() {
        let v = Vocab::build(&["hello world"], 1).unwrap();
        let id = v.id("hello").unwrap();
        let e = encode("hello", &v, 64).unwrap();
        assert_eq!(e.ids, [id]);
        assert_eq!(e.word_set, [id]);

        let e = encode("zzz-unseen-token", &v, 64).unwrap();
        assert_eq!(e.ids, [0]);
        assert_eq!(e.word_set, [0]);
    }

    #[test]
    fn encode_truncates_and_rejects_empty() {
        let v = Vocab::build(&["a b c d"], 1).unwrap();
        let e = encode("a b c d", &v, 2).unwrap();
        assert_eq!(e.ids.len(), 2);
        assert_eq!(e.word_set.len(), 2);
        assert!(matches!(
            encode("   ", &v, 8),
            Err(GlossError::EmptySentence)
        ));
        assert!(encode("a", &v, 0).is_err());
    }

    #[test]
    fn corpus_reports_empty_line_number() {
        let v = Vocab::build(&["a b"], 1).unwrap();
        match EncodedCorpus::encode(&["a", " "], &v, 8) {
            Err(GlossError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn from_tokens_validates() {
        assert!(Vocab::from_tokens(vec!["a".into()]).is_err());
        assert!(Vocab::from_tokens(vec![UNK_TOKEN.into(), "a".into(), "a".into()]).is_err());
        let v = Vocab::from_tokens(vec![UNK_TOKEN.into(), "a".into()]).unwrap();
        assert_eq!(v.id("a"), Some(1));
    }

    fn sentence_strategy() -> impl Strategy<Value = String> {
        prop::collection::vec(
            prop::sample::select(vec!["a", "b", "c", "dd", "e.", "F", "g-h"]),
            1..12,
        )
        .prop_map(|w| w.join(" "))
    }

    proptest! {
        #[test]
        fn encode_is_deterministic_and_word_set_matches(
            corpus in prop::collection::vec(sentence_strategy(), 1..10),
            probe in sentence_strategy(),
            max_len in 1usize..8,
        ) {
            let v = Vocab::build(&corpus, 1).unwrap();
            let a = encode(&probe, &v, max_len).unwrap();
            let b = encode(&probe, &v, max_len).unwrap();
            prop_assert_eq!(&a, &b);
            let mut set: Vec<usize> = a.ids.clone();
            set.sort_unstable();
            set.dedup();
            prop_assert_eq!(&set, &a.word_set);
            prop_assert!(a.ids.iter().all(|&id| id < v.len()));
            prop_assert!(a.word_set.len() <= a.ids.len());
        }

        #[test]
        fn vocab_is_permutation_stable(
            mut corpus in prop::collection::vec(sentence_strategy(), 1..10),
            min_count in 1u64..3,
        ) {
            let a = Vocab::build(&corpus, min_count).unwrap();
            corpus.reverse();
            let b = Vocab::build(&corpus, min_count).unwrap();
            prop_assert_eq!(a.tokens(), b.tokens());
            for id in 0..a.len() {
                prop_assert_eq!(a.id(a.token(id).unwrap()), Some(id));
                if id != UNK_ID {
                    prop_assert!(a.count(id).unwrap() >= min_count);
                }
            }
        }
    }
}
