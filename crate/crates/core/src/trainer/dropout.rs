use rand::Rng;

use crate::autodiff::{Graph, NodeId, Tensor};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Non-inverted dropout. In training each element is zeroed with
/// probability `p` and survivors keep their value; at evaluation time every
/// element is multiplied by `1 - p` instead.
pub fn apply_dropout<R: Rng + ?Sized>(x: &[f64], p: f64, mode: Mode, rng: &mut R) -> Vec<f64> {
    if p == 0.0 {
        return x.to_vec();
    }
    match mode {
        Mode::Train => x
            .iter()
            .map(|&v| if rng.random_bool(p) { 0.0 } else { v })
            .collect(),
        Mode::Eval => x.iter().map(|&v| v * (1.0 - p)).collect(),
    }
}

/// Graph version of [`apply_dropout`]; the training mask is a constant input.
pub fn dropout_node<R: Rng + ?Sized>(
    g: &mut Graph,
    x: NodeId,
    p: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<NodeId> {
    if p == 0.0 {
        return Ok(x);
    }
    match mode {
        Mode::Train => {
            let n = g.value(x).len();
            let mask = apply_dropout(&vec![1.0; n], p, mode, rng);
            let m = g.input(Tensor::vector(mask), false);
            g.mul(x, m)
        }
        Mode::Eval => g.scale(x, 1.0 - p),
    }
}
