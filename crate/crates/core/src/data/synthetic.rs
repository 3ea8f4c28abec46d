//! Deterministic synthetic corpora so every workflow runs without external
//! downloads.
//!
//! * [`entity_corpus`]: BIO-tagged sentences with `PER` and `LOC` mentions.
//! * [`error_corpus`]: a bigram "language" in which roughly `error_rate` of
//!   tokens break the grammar and are labelled `i` (all others `c`).

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Corpus, Split};
use crate::error::Result;

const SYLLABLES: [&str; 16] = [
    "ba", "ke", "lo", "mi", "nu", "ra", "se", "ti", "vo", "zu", "da", "fe", "go", "hi", "ju", "pa",
];

/// Pronounceable digit-free word for index `i` (unique for `i < 4096`).
pub fn word(i: usize) -> String {
    let mut w = String::new();
    w.push_str(SYLLABLES[i % 16]);
    w.push_str(SYLLABLES[(i / 16) % 16]);
    if i >= 256 {
        w.push_str(SYLLABLES[(i / 256) % 16]);
    }
    w
}

/// Parallel token/label string sequences.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledSentences(pub Vec<(Vec<String>, Vec<String>)>);

impl LabeledSentences {
    pub fn to_conll(&self) -> String {
        let mut out = String::new();
        for (tokens, labels) in &self.0 {
            for (t, l) in tokens.iter().zip(labels) {
                out.push_str(t);
                out.push(' ');
                out.push_str(l);
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }

    pub fn into_corpus(self, split: Split) -> Result<Corpus> {
        Corpus::from_labeled(&self.0, split)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn split_at(mut self, n: usize) -> (Self, Self) {
        let tail = self.0.split_off(n);
        (self, Self(tail))
    }
}

const FILLERS: [&str; 14] = [
    "the", "a", "of", "in", "said", "proposes", "measures", "on", "to", "and", "visited", "met",
    "reported", "today",
];

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

/// BIO-tagged entity corpus with labels `O`, `B-PER`, `I-PER`, `B-LOC`, `I-LOC`.
///
/// Person mentions are one or two capitalized names; location mentions end
/// in `-burg`, optionally preceded by `Nord`. Mentions never touch, so each
/// label is a function of the token and its left neighbour.
pub fn entity_corpus(n_sentences: usize, n_names: usize, seed: u64) -> LabeledSentences {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let persons: Vec<String> = (0..n_names).map(|i| capitalize(&word(i + 40))).collect();
    let places: Vec<String> = (0..n_names)
        .map(|i| capitalize(&word(i + 300)) + "burg")
        .collect();
    let mut out = Vec::with_capacity(n_sentences);
    for _ in 0..n_sentences {
        let mut tokens = Vec::new();
        let mut labels = Vec::new();
        let len = rng.random_range(4..9usize);
        let mut last_entity = true;
        while tokens.len() < len {
            if !last_entity && rng.random_bool(0.35) {
                if rng.random_bool(0.5) {
                    tokens.push(persons.choose(&mut rng).unwrap().clone());
                    labels.push("B-PER".to_string());
                    if rng.random_bool(0.4) {
                        tokens.push(persons.choose(&mut rng).unwrap().clone());
                        labels.push("I-PER".to_string());
                    }
                } else {
                    if rng.random_bool(0.3) {
                        tokens.push("Nord".to_string());
                        labels.push("B-LOC".to_string());
                        tokens.push(places.choose(&mut rng).unwrap().clone());
                        labels.push("I-LOC".to_string());
                    } else {
                        tokens.push(places.choose(&mut rng).unwrap().clone());
                        labels.push("B-LOC".to_string());
                    }
                }
                last_entity = true;
            } else {
                tokens.push(FILLERS.choose(&mut rng).unwrap().to_string());
                labels.push("O".to_string());
                last_entity = false;
            }
        }
        out.push((tokens, labels));
    }
    LabeledSentences(out)
}

/// Grammar shared by every split drawn from the same `grammar_seed`.
#[derive(Clone, Debug)]
pub struct BigramGrammar {
    words: Vec<String>,
    successors: Vec<Vec<usize>>,
}

impl BigramGrammar {
    /// `vocab_size` words, each allowed to be followed by `branching`
    /// distinct successors.
    pub fn new(vocab_size: usize, branching: usize, grammar_seed: u64) -> Self {
        assert!(branching < vocab_size);
        let mut rng = ChaCha8Rng::seed_from_u64(grammar_seed);
        let words = (0..vocab_size).map(word).collect();
        let all: Vec<usize> = (0..vocab_size).collect();
        let successors = (0..vocab_size)
            .map(|_| all.choose_multiple(&mut rng, branching).copied().collect())
            .collect();
        Self { words, successors }
    }

    pub fn allows(&self, prev: &str, next: &str) -> bool {
        let p = self.words.iter().position(|w| w == prev);
        let n = self.words.iter().position(|w| w == next);
        match (p, n) {
            (Some(p), Some(n)) => self.successors[p].contains(&n),
            _ => false,
        }
    }

    /// Sentences of 6–14 tokens. Each non-initial token is, with probability
    /// `error_rate`, a word outside the previous word's successor set
    /// (label `i`); otherwise an allowed successor (label `c`).
    pub fn sample(&self, n_sentences: usize, error_rate: f64, seed: u64) -> LabeledSentences {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = self.words.len();
        let mut out = Vec::with_capacity(n_sentences);
        for _ in 0..n_sentences {
            let len = rng.random_range(6..15usize);
            let mut cur = rng.random_range(0..v);
            let mut tokens = vec![self.words[cur].clone()];
            let mut labels = vec!["c".to_string()];
            while tokens.len() < len {
                let next = if rng.random_bool(error_rate) {
                    labels.push("i".to_string());
                    loop {
                        let w = rng.random_range(0..v);
                        if !self.successors[cur].contains(&w) {
                            break w;
                        }
                    }
                } else {
                    labels.push("c".to_string());
                    *self.successors[cur].choose(&mut rng).unwrap()
                };
                tokens.push(self.words[next].clone());
                cur = next;
            }
            out.push((tokens, labels));
        }
        LabeledSentences(out)
    }
}

/// Error-detection corpus drawn from a fresh [`BigramGrammar`].
pub fn error_corpus(
    n_sentences: usize,
    vocab_size: usize,
    branching: usize,
    error_rate: f64,
    seed: u64,
) -> LabeledSentences {
    BigramGrammar::new(vocab_size, branching, seed).sample(n_sentences, error_rate, seed.wrapping_add(1))
}

/// Grammar behind the bundled error-detection files.
pub fn bundled_grammar() -> BigramGrammar {
    BigramGrammar::new(40, 3, 7)
}

/// The corpora shipped under `data/`, as `(file name, sentences)` pairs:
/// an entity corpus (60/30/30 sentences) and an error-detection corpus
/// (400/150/150 sentences, about 15% positive tokens).
pub fn bundle() -> Vec<(&'static str, LabeledSentences)> {
    let (ent_train, rest) = entity_corpus(120, 8, 21).split_at(60);
    let (ent_dev, ent_test) = rest.split_at(30);
    let grammar = bundled_grammar();
    vec![
        ("entities.train.conll", ent_train),
        ("entities.dev.conll", ent_dev),
        ("entities.test.conll", ent_test),
        ("errors.train.conll", grammar.sample(400, 0.15, 8)),
        ("errors.dev.conll", grammar.sample(150, 0.15, 9)),
        ("errors.test.conll", grammar.sample(150, 0.15, 10)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn words_are_unique_and_digit_free() {
        let ws: std::collections::HashSet<_> = (0..1000).map(word).collect();
        assert_eq!(ws.len(), 1000);
        assert!(ws.iter().all(|w| !w.chars().any(|c| c.is_ascii_digit())));
    }

    #[test]
    fn entity_corpus_is_valid_bio_and_deterministic() {
        let a = entity_corpus(60, 12, 5);
        assert_eq!(a, entity_corpus(60, 12, 5));
        let c = a.clone().into_corpus(Split::Train).unwrap();
        assert_eq!(c.label_set.len(), 5);
        for labels in c.label_strings() {
            crate::eval::extract_spans_strict(&labels).unwrap();
        }
    }

    #[test]
    fn error_labels_match_grammar() {
        let g = BigramGrammar::new(40, 3, 11);
        let data = g.sample(200, 0.15, 12);
        let mut positives = 0;
        let mut total = 0;
        for (tokens, labels) in &data.0 {
            assert_eq!(labels[0], "c");
            for t in 1..tokens.len() {
                let ok = g.allows(&tokens[t - 1], &tokens[t]);
                assert_eq!(labels[t] == "i", !ok);
            }
            positives += labels.iter().filter(|l| *l == "i").count();
            total += labels.len();
        }
        let rate = positives as f64 / total as f64;
        assert!((0.10..0.18).contains(&rate), "error rate {rate}");
    }
}
