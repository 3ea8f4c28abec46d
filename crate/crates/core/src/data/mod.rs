//! Column-format corpora, token normalization, vocabularies, pretrained
//! embeddings and batching.

mod batch;
mod conll;
mod embeddings;
pub mod synthetic;
mod vocab;

pub use batch::make_batches;
pub use conll::{
    iob1_to_bio, normalize_token, read_conll, read_conll_file, read_conll_str, read_tokens, write_conll,
    ColumnSpec, TagScheme,
};
pub use embeddings::{load_pretrained_embeddings, load_pretrained_embeddings_file};
pub use vocab::{build_vocabularies, CharVocabulary, LabelMap, LmVocabulary, Vocabularies, Vocabulary};
pub(crate) use vocab::VocabularyData;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

/// Vocabulary indices assigned to a token by [`Vocabularies::encode_token`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenIds {
    pub input_id: usize,
    pub lm_id: usize,
    pub char_ids: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    /// Surface form with every ASCII digit replaced by `'0'`.
    pub normalized: String,
    /// Filled in once the token is encoded against the run vocabularies.
    pub ids: Option<TokenIds>,
}

impl Token {
    pub fn new(surface: &str) -> Result<Self> {
        Ok(Self {
            normalized: normalize_token(surface)?,
            surface: surface.to_string(),
            ids: None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    pub labels: Vec<usize>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>, labels: Vec<usize>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::InvalidToken("empty sentence".into()));
        }
        if tokens.len() != labels.len() {
            return Err(Error::Label(format!(
                "{} tokens but {} labels",
                tokens.len(),
                labels.len()
            )));
        }
        Ok(Self { tokens, labels })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn is_encoded(&self) -> bool {
        self.tokens.iter().all(|t| t.ids.is_some())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
    /// Label strings indexed by the ids stored in each sentence.
    pub label_set: Vec<String>,
    pub split: Split,
}

impl Corpus {
    /// Builds a corpus from parallel token/label string sequences.
    pub fn from_labeled<S: AsRef<str>>(pairs: &[(Vec<S>, Vec<S>)], split: Split) -> Result<Self> {
        let mut label_set: Vec<String> = Vec::new();
        let mut sentences = Vec::with_capacity(pairs.len());
        for (tokens, labels) in pairs {
            let tokens = tokens
                .iter()
                .map(|t| Token::new(t.as_ref()))
                .collect::<Result<Vec<_>>>()?;
            let ids = labels
                .iter()
                .map(|l| match label_set.iter().position(|x| x == l.as_ref()) {
                    Some(i) => i,
                    None => {
                        label_set.push(l.as_ref().to_string());
                        label_set.len() - 1
                    }
                })
                .collect();
            sentences.push(Sentence::new(tokens, ids)?);
        }
        if sentences.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(Self {
            sentences,
            label_set,
            split,
        })
    }

    pub fn labels_of(&self, sentence: &Sentence) -> Vec<&str> {
        sentence
            .labels
            .iter()
            .map(|&l| self.label_set[l].as_str())
            .collect()
    }

    /// Label strings of every sentence, in corpus order.
    pub fn label_strings(&self) -> Vec<Vec<String>> {
        self.sentences
            .iter()
            .map(|s| self.labels_of(s).into_iter().map(String::from).collect())
            .collect()
    }

    pub fn num_tokens(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }
}
