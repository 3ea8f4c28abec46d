use super::LstmParams;
use crate::autodiff::{Graph, NodeId, Tensor};
use crate::error::Result;

/// One step of a forget-gate LSTM without peepholes:
///
/// ```text
/// [i f o g] = W x + U h_prev + b
/// c = σ(f) ⊙ c_prev + σ(i) ⊙ tanh(g)
/// h = σ(o) ⊙ tanh(c)
/// ```
pub fn lstm_step(
    g: &mut Graph,
    x: NodeId,
    h_prev: NodeId,
    c_prev: NodeId,
    p: &LstmParams,
) -> Result<(NodeId, NodeId)> {
    let h = p.hidden;
    let (w, u, b) = (g.param(p.w), g.param(p.u), g.param(p.b));
    let wx = g.matmul(w, x)?;
    let uh = g.matmul(u, h_prev)?;
    let z = g.add_n(&[wx, uh, b])?;
    let zi = g.slice(z, 0, h)?;
    let zf = g.slice(z, h, h)?;
    let zo = g.slice(z, 2 * h, h)?;
    let zg = g.slice(z, 3 * h, h)?;
    let i = g.sigmoid(zi)?;
    let f = g.sigmoid(zf)?;
    let o = g.sigmoid(zo)?;
    let cand = g.tanh(zg)?;
    let keep = g.mul(f, c_prev)?;
    let write = g.mul(i, cand)?;
    let c = g.add(keep, write)?;
    let tc = g.tanh(c)?;
    let h_new = g.mul(o, tc)?;
    Ok((h_new, c))
}

/// Runs an LSTM over `inputs` from `h₀ = c₀ = 0`. With `reverse` the sequence
/// is consumed right to left; the returned states are always aligned with
/// `inputs` (state `t` has seen `inputs[t..]` when reversed).
pub fn run_lstm(g: &mut Graph, inputs: &[NodeId], p: &LstmParams, reverse: bool) -> Result<Vec<NodeId>> {
    let mut h = g.input(Tensor::zeros(&[p.hidden]), false);
    let mut c = g.input(Tensor::zeros(&[p.hidden]), false);
    let mut states = vec![h; inputs.len()];
    let order: Box<dyn Iterator<Item = usize>> = if reverse {
        Box::new((0..inputs.len()).rev())
    } else {
        Box::new(0..inputs.len())
    };
    for t in order {
        (h, c) = lstm_step(g, inputs[t], h, c, p)?;
        states[t] = h;
    }
    Ok(states)
}
