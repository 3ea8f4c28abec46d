use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputMode {
    #[default]
    Softmax,
    Crf,
}

impl std::str::FromStr for OutputMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "softmax" => Ok(OutputMode::Softmax),
            "crf" => Ok(OutputMode::Crf),
            _ => Err(Error::Config(format!("unknown output mode '{s}'"))),
        }
    }
}

/// Every dimension that determines a parameter shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSizes {
    pub word_dim: usize,
    pub char_dim: usize,
    pub char_hidden: usize,
    pub hidden: usize,
    pub combined: usize,
    pub lm_proj: usize,
    pub n_words: usize,
    pub n_chars: usize,
    pub n_labels: usize,
    pub n_lm: usize,
    pub use_char: bool,
    pub output_mode: OutputMode,
}

impl ModelSizes {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("word_dim", self.word_dim),
            ("char_dim", self.char_dim),
            ("char_hidden", self.char_hidden),
            ("hidden", self.hidden),
            ("combined", self.combined),
            ("lm_proj", self.lm_proj),
            ("n_words", self.n_words),
            ("n_chars", self.n_chars),
            ("n_labels", self.n_labels),
            ("n_lm", self.n_lm),
        ];
        match dims.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(Error::Config(format!("{name} must be at least 1"))),
            None => Ok(()),
        }
    }
}

/// LSTM weights for one direction, gates stacked in the order i, f, o, g.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmParams {
    /// `4h x input`
    pub w: ParamId,
    /// `4h x h`
    pub u: ParamId,
    /// `4h`
    pub b: ParamId,
    pub hidden: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Affine {
    pub w: ParamId,
    pub b: ParamId,
}

/// Character-level word representation and its word/char gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CharParams {
    pub embeddings: ParamId,
    pub fwd: LstmParams,
    pub bwd: LstmParams,
    /// `e x 2h_c`, maps the concatenated final states to word width.
    pub proj: Affine,
    /// `e x e` applied to the word embedding inside the gate.
    pub gate_word: ParamId,
    /// `e x e` applied to the character vector inside the gate.
    pub gate_char: ParamId,
    pub gate_inner_bias: ParamId,
    /// Outer `e x e` map and bias producing the gate logits.
    pub gate_out: Affine,
}

/// Language-modeling heads; never touched when predicting labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LmParams {
    pub fwd_proj: Affine,
    pub bwd_proj: Affine,
    pub fwd_out: Affine,
    pub bwd_out: Affine,
}

impl LmParams {
    pub fn ids(&self) -> [ParamId; 8] {
        [
            self.fwd_proj.w,
            self.fwd_proj.b,
            self.bwd_proj.w,
            self.bwd_proj.b,
            self.fwd_out.w,
            self.fwd_out.b,
            self.bwd_out.w,
            self.bwd_out.b,
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamLayout {
    pub word_embeddings: ParamId,
    pub chars: Option<CharParams>,
    pub fwd: LstmParams,
    pub bwd: LstmParams,
    pub hidden: Affine,
    pub output: Affine,
    /// `(K+2) x (K+2)`; rows/cols `K` and `K+1` are the start and end states.
    pub transitions: Option<ParamId>,
    pub lm: LmParams,
}

/// All trainable tensors of a tagger together with their layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub sizes: ModelSizes,
    pub store: ParamStore,
    pub layout: ParamLayout,
}

const SMALL_INIT: f64 = 0.05;

fn uniform<R: Rng>(rng: &mut R, shape: &[usize], limit: f64) -> Tensor {
    Tensor::from_fn(shape, || rng.random_range(-limit..=limit))
}

fn glorot<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    uniform(rng, &[rows, cols], limit)
}

fn add_lstm<R: Rng>(store: &mut ParamStore, rng: &mut R, name: &str, input: usize, hidden: usize) -> LstmParams {
    let w = store.add(format!("{name}.w"), glorot(rng, 4 * hidden, input));
    let u = store.add(format!("{name}.u"), glorot(rng, 4 * hidden, hidden));
    let mut bias = Tensor::zeros(&[4 * hidden]);
    bias.data_mut()[hidden..2 * hidden].fill(1.0);
    let b = store.add(format!("{name}.b"), bias);
    LstmParams { w, u, b, hidden }
}

fn add_affine<R: Rng>(store: &mut ParamStore, rng: &mut R, name: &str, out: usize, input: usize) -> Affine {
    Affine {
        w: store.add(format!("{name}.w"), glorot(rng, out, input)),
        b: store.add(format!("{name}.b"), Tensor::zeros(&[out])),
    }
}

fn add_small_affine<R: Rng>(store: &mut ParamStore, rng: &mut R, name: &str, out: usize, input: usize) -> Affine {
    Affine {
        w: store.add(format!("{name}.w"), uniform(rng, &[out, input], SMALL_INIT)),
        b: store.add(format!("{name}.b"), Tensor::zeros(&[out])),
    }
}

impl ModelParams {
    /// Freshly initialized parameters. Embeddings and LM heads are drawn from
    /// `U(-0.05, 0.05)`, other matrices from a Glorot uniform; the forget-gate
    /// bias starts at 1 and every other bias and transition at 0.
    pub fn init<R: Rng>(sizes: ModelSizes, rng: &mut R) -> Result<Self> {
        sizes.validate()?;
        let s = sizes;
        let mut store = ParamStore::new();
        let word_embeddings = store.add("word_embeddings", uniform(rng, &[s.n_words, s.word_dim], SMALL_INIT));
        let chars = if s.use_char {
            let embeddings = store.add("char_embeddings", uniform(rng, &[s.n_chars, s.char_dim], SMALL_INIT));
            let fwd = add_lstm(&mut store, rng, "char_lstm_fwd", s.char_dim, s.char_hidden);
            let bwd = add_lstm(&mut store, rng, "char_lstm_bwd", s.char_dim, s.char_hidden);
            let proj = add_affine(&mut store, rng, "char_proj", s.word_dim, 2 * s.char_hidden);
            let gate_word = store.add("char_gate.word", glorot(rng, s.word_dim, s.word_dim));
            let gate_char = store.add("char_gate.char", glorot(rng, s.word_dim, s.word_dim));
            let gate_inner_bias = store.add("char_gate.inner_b", Tensor::zeros(&[s.word_dim]));
            let gate_out = add_affine(&mut store, rng, "char_gate.out", s.word_dim, s.word_dim);
            Some(CharParams {
                embeddings,
                fwd,
                bwd,
                proj,
                gate_word,
                gate_char,
                gate_inner_bias,
                gate_out,
            })
        } else {
            None
        };
        let fwd = add_lstm(&mut store, rng, "word_lstm_fwd", s.word_dim, s.hidden);
        let bwd = add_lstm(&mut store, rng, "word_lstm_bwd", s.word_dim, s.hidden);
        let hidden = add_affine(&mut store, rng, "hidden", s.combined, 2 * s.hidden);
        let output = add_affine(&mut store, rng, "output", s.n_labels, s.combined);
        let transitions = match s.output_mode {
            OutputMode::Crf => Some(store.add(
                "crf.transitions",
                Tensor::zeros(&[s.n_labels + 2, s.n_labels + 2]),
            )),
            OutputMode::Softmax => None,
        };
        let lm = LmParams {
            fwd_proj: add_small_affine(&mut store, rng, "lm_fwd_proj", s.lm_proj, s.hidden),
            bwd_proj: add_small_affine(&mut store, rng, "lm_bwd_proj", s.lm_proj, s.hidden),
            fwd_out: add_small_affine(&mut store, rng, "lm_fwd_out", s.n_lm, s.lm_proj),
            bwd_out: add_small_affine(&mut store, rng, "lm_bwd_out", s.n_lm, s.lm_proj),
        };
        Ok(Self {
            sizes,
            store,
            layout: ParamLayout {
                word_embeddings,
                chars,
                fwd,
                bwd,
                hidden,
                output,
                transitions,
                lm,
            },
        })
    }

    /// Replaces the word embedding matrix (e.g. with pretrained vectors).
    pub fn set_word_embeddings(&mut self, matrix: Tensor) -> Result<()> {
        let current = self.store.get(self.layout.word_embeddings);
        if current.shape() != matrix.shape() {
            return Err(Error::Shape {
                op: "set_word_embeddings",
                left: current.shape().to_vec(),
                right: matrix.shape().to_vec(),
            });
        }
        *self.store.get_mut(self.layout.word_embeddings) = matrix;
        Ok(())
    }

    /// Rebuilds the layout for `sizes` and checks that `store` matches it by
    /// name and shape.
    pub fn from_store(sizes: ModelSizes, store: ParamStore) -> Result<Self> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let template = Self::init(sizes, &mut rng)?;
        if template.store.len() != store.len() {
            return Err(Error::ModelFormat(format!(
                "expected {} parameter tensors, found {}",
                template.store.len(),
                store.len()
            )));
        }
        for ((_, tn, tt), (_, n, t)) in template.store.iter().zip(store.iter()) {
            if tn != n || tt.shape() != t.shape() {
                return Err(Error::ModelFormat(format!(
                    "parameter {n} {:?} does not match expected {tn} {:?}",
                    t.shape(),
                    tt.shape()
                )));
            }
        }
        Ok(Self {
            sizes,
            store,
            layout: template.layout,
        })
    }
}

