use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use super::{Corpus, Sentence, Split, Token};
use crate::error::{Error, Result};

/// Replaces every ASCII digit with `'0'`, leaving all other characters as-is.
pub fn normalize_token(surface: &str) -> Result<String> {
    if surface.is_empty() {
        return Err(Error::InvalidToken("empty token".into()));
    }
    Ok(surface
        .chars()
        .map(|c| if c.is_ascii_digit() { '0' } else { c })
        .collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TagScheme {
    #[default]
    Bio,
    /// IOB1 tags are rewritten to BIO while reading.
    Iob1,
}

/// Which columns hold the token and the label.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ColumnSpec {
    pub token_column: usize,
    /// `None` selects the last column of each line.
    pub label_column: Option<usize>,
    pub scheme: TagScheme,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        Self {
            token_column: 0,
            label_column: None,
            scheme: TagScheme::Bio,
        }
    }
}

impl ColumnSpec {
    pub fn new(token_column: usize, label_column: usize) -> Self {
        Self {
            token_column,
            label_column: Some(label_column),
            scheme: TagScheme::Bio,
        }
    }
}

/// Rewrites IOB1 tags in place: an `I-X` that does not continue an `X` span
/// becomes `B-X`.
pub fn iob1_to_bio(labels: &mut [String]) {
    let mut prev: Option<String> = None;
    for label in labels.iter_mut() {
        if let Some(ty) = label.strip_prefix("I-") {
            let continues = prev.as_deref().is_some_and(|p| {
                p.strip_prefix("I-").or_else(|| p.strip_prefix("B-")) == Some(ty)
            });
            if !continues {
                *label = format!("B-{ty}");
            }
        }
        prev = Some(label.clone());
    }
}

fn blocks<R: BufRead>(reader: R) -> Result<Vec<Vec<(usize, String)>>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::parse(i + 1, e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
            continue;
        }
        if trimmed.starts_with('#') {
            continue;
        }
        current.push((i + 1, trimmed.to_string()));
    }
    if !current.is_empty() {
        out.push(current);
    }
    Ok(out)
}

/// Reads whitespace-separated column data: one token per line, blank lines
/// between sentences, `#` comment lines and `-DOCSTART-` separators ignored.
pub fn read_conll<R: BufRead>(reader: R, columns: ColumnSpec, split: Split) -> Result<Corpus> {
    let mut sentences = Vec::new();
    let mut label_set: Vec<String> = Vec::new();
    let mut label_ids: HashMap<String, usize> = HashMap::new();

    for block in blocks(reader)? {
        if is_doc_separator(&block) {
            continue;
        }
        let mut tokens = Vec::with_capacity(block.len());
        let mut labels = Vec::with_capacity(block.len());
        for (line_no, line) in &block {
            let cols: Vec<&str> = line.split_whitespace().collect();
            let label_col = columns.label_column.unwrap_or(cols.len().saturating_sub(1));
            let needed = columns.token_column.max(label_col) + 1;
            let needed = if columns.label_column.is_none() {
                needed.max(2)
            } else {
                needed
            };
            if cols.len() < needed {
                return Err(Error::parse(
                    *line_no,
                    format!("expected at least {needed} columns, found {}", cols.len()),
                ));
            }
            tokens.push(Token::new(cols[columns.token_column])?);
            labels.push(cols[label_col].to_string());
        }
        if columns.scheme == TagScheme::Iob1 {
            iob1_to_bio(&mut labels);
        }
        let ids = labels
            .into_iter()
            .map(|l| {
                *label_ids.entry(l.clone()).or_insert_with(|| {
                    label_set.push(l);
                    label_set.len() - 1
                })
            })
            .collect();
        sentences.push(Sentence::new(tokens, ids)?);
    }
    if sentences.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(Corpus {
        sentences,
        label_set,
        split,
    })
}

fn is_doc_separator(block: &[(usize, String)]) -> bool {
    block.len() == 1 && block[0].1.split_whitespace().next() == Some("-DOCSTART-")
}

pub fn read_conll_str(text: &str, columns: ColumnSpec, split: Split) -> Result<Corpus> {
    read_conll(text.as_bytes(), columns, split)
}

pub fn read_conll_file(path: &Path, columns: ColumnSpec, split: Split) -> Result<Corpus> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_conll(std::io::BufReader::new(file), columns, split)
}

/// Reads token-only input (for prediction); extra columns are ignored.
pub fn read_tokens<R: BufRead>(reader: R, token_column: usize) -> Result<Vec<Vec<Token>>> {
    let mut out = Vec::new();
    for block in blocks(reader)? {
        if is_doc_separator(&block) {
            continue;
        }
        let mut tokens = Vec::with_capacity(block.len());
        for (line_no, line) in &block {
            let col = line.split_whitespace().nth(token_column).ok_or_else(|| {
                Error::parse(*line_no, format!("missing token column {token_column}"))
            })?;
            tokens.push(Token::new(col)?);
        }
        out.push(tokens);
    }
    if out.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(out)
}

/// Writes `token label` lines with a blank line after every sentence.
pub fn write_conll(corpus: &Corpus) -> String {
    let mut out = String::new();
    for s in &corpus.sentences {
        for (tok, &label) in s.tokens.iter().zip(&s.labels) {
            let _ = writeln!(out, "{} {}", tok.surface, corpus.label_set[label]);
        }
        out.push('\n');
    }
    out
}
