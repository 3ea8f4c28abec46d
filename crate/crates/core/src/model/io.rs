//! Single-file model format:
//!
//! ```text
//! magic "SEQLBL\0\0" | u32 version | u32 header length | JSON header
//! then per tensor: u32 name length | name | u32 rank | u64 dims... | f64 data
//! ```
//!
//! Integers and floats are little-endian; tensor data is row-major.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{predict, ModelParams, ModelSizes};
use crate::autodiff::{ParamStore, Tensor};
use crate::data::{Sentence, Token, Vocabularies, VocabularyData};
use crate::error::{Error, Result};
use crate::eval::Metric;

pub const MAGIC: &[u8; 8] = b"SEQLBL\0\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    sizes: ModelSizes,
    vocab: VocabularyData,
    dropout_p: f64,
    metric: Metric,
    positive_label: String,
}

/// Trained parameters together with everything needed to tag new text.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub params: ModelParams,
    pub vocab: Vocabularies,
    /// Dropout probability used in training; applied as `1 - p` scaling at
    /// prediction time.
    pub dropout_p: f64,
    pub metric: Metric,
    pub positive_label: String,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::ModelFormat("unexpected end of file".into()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

impl Model {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            sizes: self.params.sizes,
            vocab: self.vocab.to_data(),
            dropout_p: self.dropout_p,
            metric: self.metric,
            positive_label: self.positive_label.clone(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::ModelFormat(e.to_string()))?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, name, t) in self.params.store.iter() {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &x in t.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len()).ok() != Some(&MAGIC[..]) {
            return Err(Error::ModelFormat("not a model file".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let len = r.u32()? as usize;
        let header: Header =
            serde_json::from_slice(r.take(len)?).map_err(|e| Error::ModelFormat(format!("bad header: {e}")))?;
        let vocab = Vocabularies::from_data(header.vocab)?;
        let s = header.sizes;
        let expected = [
            ("word", s.n_words, vocab.words.len()),
            ("LM", s.n_lm, vocab.lm.len()),
            ("char", s.n_chars, vocab.chars.len()),
            ("label", s.n_labels, vocab.labels.len()),
        ];
        for (what, size, found) in expected {
            if size != found {
                return Err(Error::ModelFormat(format!(
                    "{what} vocabulary has {found} entries but the model expects {size}"
                )));
            }
        }

        let mut store = ParamStore::new();
        while r.pos < bytes.len() {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::ModelFormat("parameter name is not UTF-8".into()))?
                .to_string();
            let rank = r.u32()? as usize;
            if !(1..=2).contains(&rank) {
                return Err(Error::ModelFormat(format!("parameter {name} has rank {rank}")));
            }
            let shape = (0..rank)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::ModelFormat("tensor too large".into()))?)?;
            let data: Vec<f64> = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let t = Tensor::new(shape, data).map_err(|e| Error::ModelFormat(e.to_string()))?;
            store.add(name, t);
        }
        if !store.all_finite() {
            return Err(Error::ModelFormat("parameters contain non-finite values".into()));
        }
        let params = ModelParams::from_store(s, store)?;
        Ok(Self {
            params,
            vocab,
            dropout_p: header.dropout_p,
            metric: header.metric,
            positive_label: header.positive_label,
        })
    }

    /// Writes to a temporary file next to `path` and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        write_atomic(path, &bytes)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Label ids for an encoded sentence.
    pub fn predict(&self, sentence: &Sentence) -> Result<Vec<usize>> {
        predict(&self.params, sentence, self.dropout_p)
    }

    /// Encodes raw tokens and returns label strings.
    pub fn tag(&self, tokens: &[Token]) -> Result<Vec<String>> {
        let mut tokens = tokens.to_vec();
        self.vocab.encode_tokens(&mut tokens);
        let n = tokens.len();
        let sentence = Sentence::new(tokens, vec![0; n])?;
        let ids = self.predict(&sentence)?;
        Ok(ids.into_iter().map(|i| self.vocab.labels.label(i).to_string()).collect())
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so a failed write never leaves a partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
