//! Reverse-mode gradients compared with finite differences, first on a
//! small expression and then on the complete tagger objective.

use seqlabel::autodiff::{grad_check, ParamStore, Tensor};
use seqlabel::model::{toy_gradcheck, OutputMode};

fn main() -> seqlabel::Result<()> {
    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::matrix(2, 3, vec![0.1, -0.4, 0.3, 0.7, 0.2, -0.5])?);
    let x = store.add("x", Tensor::vector(vec![1.0, -2.0, 0.5]));
    let ids = [w, x];
    // loss = -log_softmax(tanh(W x))[1]
    let report = grad_check(&mut store, &ids, 1e-4, |g| {
        let (w, x) = (g.param(w), g.param(x));
        let h = g.matmul(w, x)?;
        let a = g.tanh(h)?;
        let lp = g.log_softmax(a)?;
        let y = g.pick(lp, 1)?;
        g.scale(y, -1.0)
    })?;
    for p in &report.per_param {
        println!("{:<4} max relative error {:.2e}", p.name, p.max_rel_error);
    }

    for mode in [OutputMode::Softmax, OutputMode::Crf] {
        for gamma in [0.0, 0.1] {
            let r = toy_gradcheck(mode, gamma, None)?;
            let n: usize = r.per_param.iter().map(|p| p.entries).sum();
            println!("{mode:?} gamma={gamma}: {n} entries, max relative error {:.2e}", r.max_rel_error());
        }
    }
    Ok(())
}
