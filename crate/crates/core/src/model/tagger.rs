use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};

use super::crf::{crf_loss, viterbi_decode};
use super::lstm::run_lstm;
use super::{Affine, CharParams, ModelParams, OutputMode};
use crate::autodiff::{Graph, NodeId, OpKind, ParamId, Tensor};
use crate::data::Sentence;
use crate::error::{Error, Result};
use crate::trainer::{dropout_node, Mode};

fn affine(g: &mut Graph, a: &Affine, x: NodeId) -> Result<NodeId> {
    let (w, b) = (g.param(a.w), g.param(a.b));
    let wx = g.matmul(w, x)?;
    g.add(wx, b)
}

/// Character-level vector for one word: final states of a forward and a
/// backward LSTM over the character embeddings, concatenated and passed
/// through `tanh(W [→c; ←c] + b)`.
pub fn char_representation(g: &mut Graph, p: &CharParams, char_ids: &[usize]) -> Result<NodeId> {
    if char_ids.is_empty() {
        return Err(Error::InvalidToken("word has no characters".into()));
    }
    let table = g.param(p.embeddings);
    let xs = char_ids
        .iter()
        .map(|&c| g.row_lookup(table, c))
        .collect::<Result<Vec<_>>>()?;
    let fwd = run_lstm(g, &xs, &p.fwd, false)?;
    let bwd = run_lstm(g, &xs, &p.bwd, true)?;
    let both = g.concat(fwd[xs.len() - 1], bwd[0])?;
    let z = affine(g, &p.proj, both)?;
    g.tanh(z)
}

/// Gated mix `z ⊙ x_word + (1 − z) ⊙ x_char` with
/// `z = σ(W₃ tanh(W₁ x_word + W₂ x_char + b₁) + b₃)`.
pub fn combine_word_char(g: &mut Graph, p: &CharParams, x_word: NodeId, x_char: NodeId) -> Result<NodeId> {
    let (w1, w2, b1) = (g.param(p.gate_word), g.param(p.gate_char), g.param(p.gate_inner_bias));
    let a = g.matmul(w1, x_word)?;
    let b = g.matmul(w2, x_char)?;
    let pre = g.add_n(&[a, b, b1])?;
    let inner = g.tanh(pre)?;
    let logits = affine(g, &p.gate_out, inner)?;
    let z = g.sigmoid(logits)?;
    let diff = g.sub(x_word, x_char)?;
    let mixed = g.mul(z, diff)?;
    g.add(x_char, mixed)
}

/// Character vectors already built in the current graph, keyed by the
/// character id sequence. Sharing them across the sentences of a batch is
/// exact: the representation depends on parameters only.
#[derive(Debug, Default)]
pub struct CharCache(HashMap<Vec<usize>, NodeId>);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EncodeOptions {
    pub mode: Mode,
    pub dropout_p: f64,
    /// Build the language-model projections `→m_t`, `←m_t`.
    pub with_lm: bool,
}

impl EncodeOptions {
    pub fn eval(dropout_p: f64) -> Self {
        Self {
            mode: Mode::Eval,
            dropout_p,
            with_lm: false,
        }
    }
}

/// Per-token nodes of one encoded sentence.
#[derive(Clone, Debug)]
pub struct SentenceGraph {
    pub inputs: Vec<NodeId>,
    pub fwd: Vec<NodeId>,
    pub bwd: Vec<NodeId>,
    pub hidden: Vec<NodeId>,
    pub combined: Vec<NodeId>,
    /// Empty unless built with `with_lm`.
    pub lm_fwd: Vec<NodeId>,
    pub lm_bwd: Vec<NodeId>,
}

impl SentenceGraph {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

pub fn encode_sentence<R: Rng + ?Sized>(
    g: &mut Graph,
    model: &ModelParams,
    sentence: &Sentence,
    opts: EncodeOptions,
    rng: &mut R,
    cache: &mut CharCache,
) -> Result<SentenceGraph> {
    let layout = &model.layout;
    let words = g.param(layout.word_embeddings);
    let mut inputs = Vec::with_capacity(sentence.len());
    for token in &sentence.tokens {
        let ids = token
            .ids
            .as_ref()
            .ok_or_else(|| Error::State(format!("token '{}' is not encoded", token.surface)))?;
        let xw = g.row_lookup(words, ids.input_id)?;
        let x = match &layout.chars {
            Some(cp) => {
                let xc = match cache.0.get(&ids.char_ids) {
                    Some(&n) => n,
                    None => {
                        let n = char_representation(g, cp, &ids.char_ids)?;
                        cache.0.insert(ids.char_ids.clone(), n);
                        n
                    }
                };
                combine_word_char(g, cp, xw, xc)?
            }
            None => xw,
        };
        inputs.push(dropout_node(g, x, opts.dropout_p, opts.mode, rng)?);
    }
    let fwd = run_lstm(g, &inputs, &layout.fwd, false)?;
    let bwd = run_lstm(g, &inputs, &layout.bwd, true)?;
    let mut hidden = Vec::with_capacity(inputs.len());
    let mut combined = Vec::with_capacity(inputs.len());
    for (&f, &b) in fwd.iter().zip(&bwd) {
        let h = g.concat(f, b)?;
        let z = affine(g, &layout.hidden, h)?;
        hidden.push(h);
        combined.push(g.tanh(z)?);
    }
    let (mut lm_fwd, mut lm_bwd) = (Vec::new(), Vec::new());
    if opts.with_lm {
        for (&f, &b) in fwd.iter().zip(&bwd) {
            let zf = affine(g, &layout.lm.fwd_proj, f)?;
            lm_fwd.push(g.tanh(zf)?);
            let zb = affine(g, &layout.lm.bwd_proj, b)?;
            lm_bwd.push(g.tanh(zb)?);
        }
    }
    Ok(SentenceGraph {
        inputs,
        fwd,
        bwd,
        hidden,
        combined,
        lm_fwd,
        lm_bwd,
    })
}

/// Label scores `W_o d_t + b_o` for every token.
pub fn emissions(g: &mut Graph, model: &ModelParams, sg: &SentenceGraph) -> Result<Vec<NodeId>> {
    sg.combined
        .iter()
        .map(|&d| affine(g, &model.layout.output, d))
        .collect()
}

/// Negative log-likelihood of `targets` under a softmax over each entry of
/// `logits`.
pub fn softmax_label_loss(g: &mut Graph, logits: &[NodeId], targets: &[usize]) -> Result<NodeId> {
    if logits.len() != targets.len() || logits.is_empty() {
        return Err(Error::Shape {
            op: "softmax_label_loss",
            left: vec![logits.len()],
            right: vec![targets.len()],
        });
    }
    let mut terms = Vec::with_capacity(logits.len());
    for (&l, &y) in logits.iter().zip(targets) {
        let k = g.value(l).len();
        if y >= k {
            return Err(Error::Index {
                op: "softmax_label_loss",
                index: y,
                len: k,
            });
        }
        let lp = g.log_softmax(l)?;
        terms.push(g.pick(lp, y)?);
    }
    let total = g.add_n(&terms)?;
    g.scale(total, -1.0)
}

fn lm_direction(
    g: &mut Graph,
    out: &Affine,
    states: &[NodeId],
    targets: impl Iterator<Item = usize>,
) -> Result<NodeId> {
    let mut terms = Vec::new();
    for (&m, y) in states.iter().zip(targets) {
        let logits = affine(g, out, m)?;
        let k = g.value(logits).len();
        if y >= k {
            return Err(Error::Index {
                op: "lm_losses",
                index: y,
                len: k,
            });
        }
        let lp = g.log_softmax(logits)?;
        terms.push(g.pick(lp, y)?);
    }
    if terms.is_empty() {
        return Ok(g.input(Tensor::scalar(0.0), false));
    }
    let total = g.add_n(&terms)?;
    g.scale(total, -1.0)
}

/// Forward and backward language-modeling losses. The forward state at
/// position `t` predicts the word at `t+1` and the backward state at `t`
/// predicts `t-1`; there are no sentence-boundary targets.
pub fn lm_losses(g: &mut Graph, model: &ModelParams, sg: &SentenceGraph, lm_ids: &[usize]) -> Result<(NodeId, NodeId)> {
    let t = sg.len();
    if sg.lm_fwd.len() != t || sg.lm_bwd.len() != t || lm_ids.len() != t {
        return Err(Error::State("sentence graph was built without language-model projections".into()));
    }
    let lm = &model.layout.lm;
    let fwd = lm_direction(g, &lm.fwd_out, &sg.lm_fwd[..t - 1], lm_ids[1..].iter().copied())?;
    let bwd = lm_direction(g, &lm.bwd_out, &sg.lm_bwd[1..], lm_ids[..t - 1].iter().copied())?;
    Ok((fwd, bwd))
}

/// `E + γ (→E + ←E)`; returns `label` itself when `γ = 0`.
pub fn total_loss(g: &mut Graph, label: NodeId, lm_fwd: NodeId, lm_bwd: NodeId, gamma: f64) -> Result<NodeId> {
    if !(gamma >= 0.0) {
        return Err(Error::Config(format!("gamma must be non-negative, got {gamma}")));
    }
    if gamma == 0.0 {
        return Ok(label);
    }
    let lm = g.add(lm_fwd, lm_bwd)?;
    let weighted = g.scale(lm, gamma)?;
    g.add(label, weighted)
}

/// Loss nodes for one sentence. The LM terms are absent when `γ = 0`.
#[derive(Clone, Copy, Debug)]
pub struct SentenceLoss {
    pub label: NodeId,
    pub lm: Option<(NodeId, NodeId)>,
    pub total: NodeId,
}

/// Label loss for one encoded sentence in the model's output mode.
pub fn label_loss(g: &mut Graph, model: &ModelParams, sg: &SentenceGraph, labels: &[usize]) -> Result<NodeId> {
    let scores = emissions(g, model, sg)?;
    match (model.sizes.output_mode, model.layout.transitions) {
        (OutputMode::Softmax, _) => softmax_label_loss(g, &scores, labels),
        (OutputMode::Crf, Some(a)) => {
            let a = g.param(a);
            crf_loss(g, &scores, labels, a)
        }
        (OutputMode::Crf, None) => Err(Error::State("CRF model without transitions".into())),
    }
}

/// Builds the full training objective for one sentence.
#[allow(clippy::too_many_arguments)]
pub fn sentence_loss<R: Rng + ?Sized>(
    g: &mut Graph,
    model: &ModelParams,
    sentence: &Sentence,
    gamma: f64,
    mode: Mode,
    dropout_p: f64,
    rng: &mut R,
    cache: &mut CharCache,
) -> Result<SentenceLoss> {
    if !(gamma >= 0.0) {
        return Err(Error::Config(format!("gamma must be non-negative, got {gamma}")));
    }
    let with_lm = gamma > 0.0;
    let opts = EncodeOptions {
        mode,
        dropout_p,
        with_lm,
    };
    let sg = encode_sentence(g, model, sentence, opts, rng, cache)?;
    let label = label_loss(g, model, &sg, &sentence.labels)?;
    if !with_lm {
        return Ok(SentenceLoss {
            label,
            lm: None,
            total: label,
        });
    }
    let lm_ids: Vec<usize> = sentence
        .tokens
        .iter()
        .map(|t| t.ids.as_ref().map(|i| i.lm_id).unwrap_or(0))
        .collect();
    let (f, b) = lm_losses(g, model, &sg, &lm_ids)?;
    let total = total_loss(g, label, f, b, gamma)?;
    Ok(SentenceLoss {
        label,
        lm: Some((f, b)),
        total,
    })
}

/// What the prediction path touched.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredictTrace {
    pub op_counts: BTreeMap<OpKind, usize>,
    pub params_read: Vec<ParamId>,
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Label ids for `sentence` in evaluation mode, with the trace of
/// operations and parameters used.
pub fn predict_traced(model: &ModelParams, sentence: &Sentence, dropout_p: f64) -> Result<(Vec<usize>, PredictTrace)> {
    let mut g = Graph::new(&model.store);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let sg = encode_sentence(
        &mut g,
        model,
        sentence,
        EncodeOptions::eval(dropout_p),
        &mut rng,
        &mut CharCache::default(),
    )?;
    let scores = emissions(&mut g, model, &sg)?;
    let labels = match (model.sizes.output_mode, model.layout.transitions) {
        (OutputMode::Crf, Some(a)) => {
            let k = model.sizes.n_labels;
            let mut flat = Vec::with_capacity(scores.len() * k);
            for &s in &scores {
                flat.extend_from_slice(g.value(s).data());
            }
            let e = Tensor::matrix(scores.len(), k, flat)?;
            let a = g.param(a);
            viterbi_decode(&e, g.value(a))?.0
        }
        _ => scores.iter().map(|&s| argmax(g.value(s).data())).collect(),
    };
    let trace = PredictTrace {
        op_counts: g.op_counts().clone(),
        params_read: g.params_read(),
    };
    Ok((labels, trace))
}

pub fn predict(model: &ModelParams, sentence: &Sentence, dropout_p: f64) -> Result<Vec<usize>> {
    predict_traced(model, sentence, dropout_p).map(|(labels, _)| labels)
}
