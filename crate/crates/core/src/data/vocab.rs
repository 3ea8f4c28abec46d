use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Corpus, Sentence, Token, TokenIds};
use crate::error::{Error, Result};

const OOV: &str = "<OOV>";
const REST: &str = "<REST>";
const UNK_CHAR: &str = "<UNK>";

/// Input word vocabulary. Id 0 is the OOV token; observed words follow in
/// first-occurrence order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    word_to_id: HashMap<String, usize>,
    id_to_word: Vec<String>,
    oov_id: usize,
    counts: HashMap<String, usize>,
}

impl Vocabulary {
    fn from_words(words: Vec<String>, counts: HashMap<String, usize>) -> Self {
        let mut id_to_word = vec![OOV.to_string()];
        id_to_word.extend(words);
        let word_to_id = id_to_word
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Self {
            word_to_id,
            id_to_word,
            oov_id: 0,
            counts,
        }
    }

    pub fn id(&self, normalized: &str) -> usize {
        self.word_to_id.get(normalized).copied().unwrap_or(self.oov_id)
    }

    pub fn contains(&self, normalized: &str) -> bool {
        self.word_to_id.contains_key(normalized)
    }

    pub fn word(&self, id: usize) -> &str {
        &self.id_to_word[id]
    }

    pub fn oov_id(&self) -> usize {
        self.oov_id
    }

    pub fn len(&self) -> usize {
        self.id_to_word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_word.is_empty()
    }

    /// Training-set frequency of a normalized word (0 when unseen or after
    /// loading from a model file).
    pub fn count(&self, normalized: &str) -> usize {
        self.counts.get(normalized).copied().unwrap_or(0)
    }

    /// Words in id order, including the OOV placeholder at id 0.
    pub fn words(&self) -> &[String] {
        &self.id_to_word
    }
}

/// Output vocabulary of the language-modeling heads: the `k` most frequent
/// training words plus one rest token at id 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LmVocabulary {
    word_to_id: HashMap<String, usize>,
    id_to_word: Vec<String>,
    rest_id: usize,
    k: usize,
}

impl LmVocabulary {
    fn from_words(words: Vec<String>, k: usize) -> Self {
        let mut id_to_word = vec![REST.to_string()];
        id_to_word.extend(words);
        let word_to_id = id_to_word
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Self {
            word_to_id,
            id_to_word,
            rest_id: 0,
            k,
        }
    }

    pub fn id(&self, normalized: &str) -> usize {
        self.word_to_id.get(normalized).copied().unwrap_or(self.rest_id)
    }

    pub fn rest_id(&self) -> usize {
        self.rest_id
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.id_to_word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_word.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.id_to_word
    }
}

/// Characters of raw surface forms; id 0 is the unknown character.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharVocabulary {
    char_to_id: HashMap<char, usize>,
    id_to_char: Vec<String>,
}

impl CharVocabulary {
    fn from_chars(chars: Vec<char>) -> Self {
        let mut id_to_char = vec![UNK_CHAR.to_string()];
        id_to_char.extend(chars.iter().map(|c| c.to_string()));
        let char_to_id = chars.into_iter().enumerate().map(|(i, c)| (c, i + 1)).collect();
        Self {
            char_to_id,
            id_to_char,
        }
    }

    pub fn id(&self, c: char) -> usize {
        self.char_to_id.get(&c).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.id_to_char.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_char.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    labels: Vec<String>,
    ids: HashMap<String, usize>,
}

impl LabelMap {
    fn new(labels: Vec<String>) -> Self {
        let ids = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        Self { labels, ids }
    }

    pub fn id(&self, label: &str) -> Option<usize> {
        self.ids.get(label).copied()
    }

    pub fn label(&self, id: usize) -> &str {
        &self.labels[id]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Every vocabulary a run needs, built from the training split only.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabularies {
    pub words: Vocabulary,
    pub lm: LmVocabulary,
    pub chars: CharVocabulary,
    pub labels: LabelMap,
}

/// Serialized form stored in model file headers, in index order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub(crate) struct VocabularyData {
    pub words: Vec<String>,
    pub lm_words: Vec<String>,
    pub lm_k: usize,
    pub chars: Vec<String>,
    pub labels: Vec<String>,
}

/// Builds the input, LM, character and label vocabularies.
///
/// Input words need a training count of at least 2. LM words are the `lm_k`
/// most frequent normalized words, ties broken by first occurrence.
pub fn build_vocabularies(train: &Corpus, lm_k: usize) -> Result<Vocabularies> {
    if lm_k == 0 {
        return Err(Error::Config("lm_k must be positive".into()));
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    let mut first_seen: Vec<String> = Vec::new();
    let mut chars: Vec<char> = Vec::new();
    let mut seen_chars = std::collections::HashSet::new();
    for tok in train.sentences.iter().flat_map(|s| &s.tokens) {
        let c = counts.entry(tok.normalized.clone()).or_insert(0);
        if *c == 0 {
            first_seen.push(tok.normalized.clone());
        }
        *c += 1;
        for ch in tok.surface.chars() {
            if seen_chars.insert(ch) {
                chars.push(ch);
            }
        }
    }

    let input_words = first_seen
        .iter()
        .filter(|w| counts[*w] >= 2)
        .cloned()
        .collect();

    // stable sort keeps first-occurrence order among equal counts
    let mut by_freq = first_seen.clone();
    by_freq.sort_by(|a, b| counts[b].cmp(&counts[a]));
    by_freq.truncate(lm_k);

    Ok(Vocabularies {
        words: Vocabulary::from_words(input_words, counts),
        lm: LmVocabulary::from_words(by_freq, lm_k),
        chars: CharVocabulary::from_chars(chars),
        labels: LabelMap::new(train.label_set.clone()),
    })
}

impl Vocabularies {
    pub fn encode_token(&self, token: &mut Token) {
        token.ids = Some(TokenIds {
            input_id: self.words.id(&token.normalized),
            lm_id: self.lm.id(&token.normalized),
            char_ids: token.surface.chars().map(|c| self.chars.id(c)).collect(),
        });
    }

    pub fn encode_tokens(&self, tokens: &mut [Token]) {
        tokens.iter_mut().for_each(|t| self.encode_token(t));
    }

    /// Encodes every token and remaps label ids onto the training label map.
    /// Fails if the corpus has a label the training data never showed.
    pub fn encode_corpus(&self, corpus: &mut Corpus) -> Result<()> {
        let remap = corpus
            .label_set
            .iter()
            .map(|l| {
                self.labels.id(l).ok_or_else(|| {
                    Error::Label(format!(
                        "label '{l}' in {:?} data does not occur in the training labels",
                        corpus.split
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        for s in &mut corpus.sentences {
            self.encode_sentence(s, &remap);
        }
        corpus.label_set = self.labels.labels().to_vec();
        Ok(())
    }

    fn encode_sentence(&self, s: &mut Sentence, remap: &[usize]) {
        self.encode_tokens(&mut s.tokens);
        s.labels.iter_mut().for_each(|l| *l = remap[*l]);
    }

    pub(crate) fn to_data(&self) -> VocabularyData {
        VocabularyData {
            words: self.words.id_to_word.clone(),
            lm_words: self.lm.id_to_word.clone(),
            lm_k: self.lm.k,
            chars: self.chars.id_to_char.clone(),
            labels: self.labels.labels.clone(),
        }
    }

    pub(crate) fn from_data(data: VocabularyData) -> Result<Self> {
        let bad = |what: &str| Error::ModelFormat(format!("malformed {what} vocabulary"));
        if data.words.first().map(String::as_str) != Some(OOV) {
            return Err(bad("word"));
        }
        if data.lm_words.first().map(String::as_str) != Some(REST) {
            return Err(bad("LM"));
        }
        if data.chars.first().map(String::as_str) != Some(UNK_CHAR) {
            return Err(bad("char"));
        }
        let chars = data.chars[1..]
            .iter()
            .map(|s| {
                let mut it = s.chars();
                match (it.next(), it.next()) {
                    (Some(c), None) => Ok(c),
                    _ => Err(bad("char")),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            words: Vocabulary::from_words(data.words[1..].to_vec(), HashMap::new()),
            lm: LmVocabulary::from_words(data.lm_words[1..].to_vec(), data.lm_k),
            chars: CharVocabulary::from_chars(chars),
            labels: LabelMap::new(data.labels),
        })
    }
}
