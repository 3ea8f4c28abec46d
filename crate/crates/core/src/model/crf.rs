//! Linear-chain CRF over `K` labels with explicit boundary states.
//!
//! Transition matrix `A` is `(K+2) x (K+2)`: `A[i][j]` scores moving from
//! label `i` to label `j`, row `K` is the start state and column `K+1` the
//! end state. A path `y` scores
//! `A[start,y1] + Σ emit[t,yt] + Σ A[yt,yt+1] + A[yT,end]`.

use crate::autodiff::{logsumexp_slice, Graph, NodeId, Tensor};
use crate::error::{Error, Result};

fn check(emissions: &Tensor, transitions: &Tensor) -> Result<(usize, usize)> {
    let (t, k) = (emissions.rows(), emissions.cols());
    if emissions.shape().len() != 2 || t == 0 || transitions.shape() != [k + 2, k + 2] {
        return Err(Error::Shape {
            op: "crf",
            left: emissions.shape().to_vec(),
            right: transitions.shape().to_vec(),
        });
    }
    Ok((t, k))
}

fn trans(a: &Tensor, from: usize, to: usize) -> f64 {
    a.data()[from * a.cols() + to]
}

/// Score of `path` under `emissions` (`T x K`) and `transitions`.
pub fn sequence_score(emissions: &Tensor, transitions: &Tensor, path: &[usize]) -> Result<f64> {
    let (t, k) = check(emissions, transitions)?;
    if path.len() != t {
        return Err(Error::Shape {
            op: "sequence_score",
            left: vec![t],
            right: vec![path.len()],
        });
    }
    if let Some(&bad) = path.iter().find(|&&y| y >= k) {
        return Err(Error::Index {
            op: "sequence_score",
            index: bad,
            len: k,
        });
    }
    let mut s = trans(transitions, k, path[0]) + trans(transitions, path[t - 1], k + 1);
    for (i, &y) in path.iter().enumerate() {
        s += emissions.row(i)[y];
        if i + 1 < t {
            s += trans(transitions, y, path[i + 1]);
        }
    }
    Ok(s)
}

/// `log Σ_y exp(score(y))` via the forward algorithm.
pub fn log_partition(emissions: &Tensor, transitions: &Tensor) -> Result<f64> {
    let (t, k) = check(emissions, transitions)?;
    let mut alpha: Vec<f64> = (0..k)
        .map(|j| trans(transitions, k, j) + emissions.row(0)[j])
        .collect();
    let mut buf = vec![0.0; k];
    for step in 1..t {
        let next: Vec<f64> = (0..k)
            .map(|j| {
                for (i, b) in buf.iter_mut().enumerate() {
                    *b = alpha[i] + trans(transitions, i, j);
                }
                logsumexp_slice(&buf) + emissions.row(step)[j]
            })
            .collect();
        alpha = next;
    }
    for (i, a) in alpha.iter_mut().enumerate() {
        *a += trans(transitions, i, k + 1);
    }
    Ok(logsumexp_slice(&alpha))
}

/// Highest-scoring path and its score. Among equal candidates the lower
/// label id wins at every decision.
pub fn viterbi_decode(emissions: &Tensor, transitions: &Tensor) -> Result<(Vec<usize>, f64)> {
    let (t, k) = check(emissions, transitions)?;
    let mut delta: Vec<f64> = (0..k)
        .map(|j| trans(transitions, k, j) + emissions.row(0)[j])
        .collect();
    let mut back = vec![vec![0usize; k]; t];
    for step in 1..t {
        let mut next = vec![0.0; k];
        for j in 0..k {
            let mut best = 0;
            let mut best_score = delta[0] + trans(transitions, 0, j);
            for i in 1..k {
                let s = delta[i] + trans(transitions, i, j);
                if s > best_score {
                    best = i;
                    best_score = s;
                }
            }
            back[step][j] = best;
            next[j] = best_score + emissions.row(step)[j];
        }
        delta = next;
    }
    let mut last = 0;
    let mut score = delta[0] + trans(transitions, 0, k + 1);
    for (i, d) in delta.iter().enumerate().skip(1) {
        let s = d + trans(transitions, i, k + 1);
        if s > score {
            last = i;
            score = s;
        }
    }
    let mut path = vec![last; t];
    for step in (1..t).rev() {
        path[step - 1] = back[step][path[step]];
    }
    Ok((path, score))
}

/// Negative log-likelihood `logZ − score(gold)` built on the graph.
/// `emissions` are `T` vectors of length `K`; `transitions` is the
/// `(K+2) x (K+2)` parameter node.
pub fn crf_loss(g: &mut Graph, emissions: &[NodeId], gold: &[usize], transitions: NodeId) -> Result<NodeId> {
    let t = emissions.len();
    if t == 0 || gold.len() != t {
        return Err(Error::Shape {
            op: "crf_loss",
            left: vec![t],
            right: vec![gold.len()],
        });
    }
    let k = g.value(emissions[0]).len();
    let a = g.value(transitions);
    if a.shape() != [k + 2, k + 2] {
        return Err(Error::Shape {
            op: "crf_loss",
            left: vec![k + 2, k + 2],
            right: a.shape().to_vec(),
        });
    }
    if let Some(&bad) = gold.iter().find(|&&y| y >= k) {
        return Err(Error::Index {
            op: "crf_loss",
            index: bad,
            len: k,
        });
    }
    let width = k + 2;

    // gold path score: emissions plus every transition on the path
    let mut gold_terms = Vec::with_capacity(2 * t + 1);
    for (e, &y) in emissions.iter().zip(gold) {
        gold_terms.push(g.pick(*e, y)?);
    }
    let mut trans_idx = vec![k * width + gold[0]];
    trans_idx.extend(gold.windows(2).map(|w| w[0] * width + w[1]));
    trans_idx.push(gold[t - 1] * width + k + 1);
    let n_trans = trans_idx.len();
    let gold_trans = g.gather(transitions, trans_idx, vec![n_trans])?;
    gold_terms.push(g.sum(gold_trans)?);
    let gold_score = g.add_n(&gold_terms)?;

    // forward algorithm
    let inner = g.block(transitions, 0, 0, k, k)?;
    let start = g.gather(transitions, (0..k).map(|j| k * width + j).collect(), vec![k])?;
    let end = g.gather(transitions, (0..k).map(|i| i * width + k + 1).collect(), vec![k])?;
    let mut alpha = g.add(start, emissions[0])?;
    for e in &emissions[1..] {
        let scores = g.add_column(inner, alpha)?;
        let reduced = g.logsumexp_cols(scores)?;
        alpha = g.add(reduced, *e)?;
    }
    let last = g.add(alpha, end)?;
    let log_z = g.logsumexp(last)?;
    g.sub(log_z, gold_score)
}
