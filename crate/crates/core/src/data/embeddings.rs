use std::io::BufRead;
use std::path::Path;

use rand::Rng;

use super::Vocabulary;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Half-width of the uniform range used for words missing from the file.
pub const EMBEDDING_INIT_RANGE: f64 = 0.05;

/// Reads plain-text word2vec vectors (optional `count dim` header line) into
/// a `|V| x dim` matrix. Rows for vocabulary words absent from the file, and
/// the OOV row, are drawn from `U(-0.05, 0.05)`.
///
/// Returns the matrix and the number of vocabulary words found in the file.
pub fn load_pretrained_embeddings<R: BufRead, G: Rng>(
    reader: R,
    vocab: &Vocabulary,
    dim: usize,
    rng: &mut G,
) -> Result<(Tensor, usize)> {
    let mut matrix = Tensor::from_fn(&[vocab.len(), dim], || {
        rng.random_range(-EMBEDDING_INIT_RANGE..=EMBEDDING_INIT_RANGE)
    });
    let mut filled = vec![false; vocab.len()];
    let mut matched = 0;

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::parse(line_no, e.to_string()))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if line_no == 1 && fields.len() == 2 {
            if let (Ok(_), Ok(file_dim)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                if file_dim != dim {
                    return Err(Error::Config(format!(
                        "embedding file has dimension {file_dim}, configured dimension is {dim}"
                    )));
                }
                continue;
            }
        }
        let values = &fields[1..];
        if values.len() != dim {
            return Err(Error::Config(format!(
                "line {line_no}: vector has {} values, configured dimension is {dim}",
                values.len()
            )));
        }
        let word = fields[0];
        if !vocab.contains(word) {
            continue;
        }
        let id = vocab.id(word);
        let parsed = values
            .iter()
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::parse(line_no, format!("invalid float '{v}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        if !filled[id] {
            filled[id] = true;
            matched += 1;
            matrix.row_mut(id).copy_from_slice(&parsed);
        }
    }
    Ok((matrix, matched))
}

pub fn load_pretrained_embeddings_file<G: Rng>(
    path: &Path,
    vocab: &Vocabulary,
    dim: usize,
    rng: &mut G,
) -> Result<(Tensor, usize)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_pretrained_embeddings(std::io::BufReader::new(file), vocab, dim, rng)
}
