use super::{Gradients, Graph, NodeId, OpKind, ParamId, ParamStore};
use crate::error::{Error, Result};

/// Relative error used by the finite-difference harness.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

#[derive(Clone, Debug)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub entries: usize,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub per_param: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.per_param
            .iter()
            .map(|p| p.max_rel_error)
            .fold(0.0, f64::max)
    }
}

fn evaluate<F>(store: &ParamStore, build: &F) -> Result<f64>
where
    F: Fn(&mut Graph) -> Result<NodeId>,
{
    let mut g = Graph::new(store);
    let loss = build(&mut g)?;
    Ok(g.scalar(loss))
}

/// Compares analytic gradients against the five-point central difference
/// `(8(L(θ+h) − L(θ−h)) − (L(θ+2h) − L(θ−2h))) / 12h`, `h = eps`, for every
/// entry of `params`.
pub fn grad_check<F>(store: &mut ParamStore, params: &[ParamId], eps: f64, build: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph) -> Result<NodeId>,
{
    grad_check_with_fault(store, params, eps, None, build)
}

/// [`grad_check`] with an optional corrupted backward rule on the analytic pass.
#[doc(hidden)]
pub fn grad_check_with_fault<F>(
    store: &mut ParamStore,
    params: &[ParamId],
    eps: f64,
    fault: Option<OpKind>,
    build: F,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph) -> Result<NodeId>,
{
    let mut grads = Gradients::zeros_like(store);
    let base = {
        let mut g = Graph::new(store);
        g.inject_backward_fault(fault);
        let loss = build(&mut g)?;
        g.backward(loss, &mut grads)?;
        g.scalar(loss)
    };
    let again = evaluate(store, &build)?;
    if base.to_bits() != again.to_bits() {
        return Err(Error::Determinism(format!(
            "loss {base} on first build, {again} on second"
        )));
    }

    let mut per_param = Vec::with_capacity(params.len());
    for &pid in params {
        let n = store.get(pid).len();
        let mut worst: f64 = 0.0;
        for k in 0..n {
            let orig = store.get(pid).data()[k];
            let mut at = |offset: f64| {
                store.get_mut(pid).data_mut()[k] = orig + offset;
                evaluate(store, &build)
            };
            let (p1, m1, p2, m2) = (at(eps), at(-eps), at(2.0 * eps), at(-2.0 * eps));
            store.get_mut(pid).data_mut()[k] = orig;
            let numeric = (8.0 * (p1? - m1?) - (p2? - m2?)) / (12.0 * eps);
            let analytic = grads.get(pid).data()[k];
            worst = worst.max(relative_error(analytic, numeric));
        }
        per_param.push(ParamCheck {
            name: store.name(pid).to_string(),
            max_rel_error: worst,
            entries: n,
        });
    }
    Ok(GradCheckReport { per_param })
}
