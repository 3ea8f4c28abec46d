use crate::autodiff::{Gradients, ParamStore, Tensor};
use crate::error::{Error, Result};

/// One AdaDelta update, elementwise:
///
/// ```text
/// Eg²  ← ρ Eg² + (1−ρ) g²
/// Δ    ← −√(Edx² + ε) / √(Eg² + ε) · g
/// Edx² ← ρ Edx² + (1−ρ) Δ²
/// θ    ← θ + lr Δ
/// ```
pub fn adadelta_update(
    param: &mut [f64],
    grad: &[f64],
    eg2: &mut [f64],
    edx2: &mut [f64],
    rho: f64,
    eps: f64,
    lr: f64,
) -> Result<()> {
    let n = param.len();
    if grad.len() != n || eg2.len() != n || edx2.len() != n {
        return Err(Error::Shape {
            op: "adadelta_update",
            left: vec![n],
            right: vec![grad.len(), eg2.len(), edx2.len()],
        });
    }
    for i in 0..n {
        let g = grad[i];
        eg2[i] = rho * eg2[i] + (1.0 - rho) * g * g;
        let delta = -((edx2[i] + eps).sqrt() / (eg2[i] + eps).sqrt()) * g;
        edx2[i] = rho * edx2[i] + (1.0 - rho) * delta * delta;
        param[i] += lr * delta;
    }
    Ok(())
}

/// Running averages for every parameter in a store.
#[derive(Clone, Debug)]
pub struct AdaDelta {
    pub rho: f64,
    pub eps: f64,
    pub lr: f64,
    eg2: Vec<Tensor>,
    edx2: Vec<Tensor>,
}

impl AdaDelta {
    pub fn new(store: &ParamStore, rho: f64, eps: f64, lr: f64) -> Self {
        let zeros: Vec<Tensor> = store.iter().map(|(_, _, t)| Tensor::zeros(t.shape())).collect();
        Self {
            rho,
            eps,
            lr,
            eg2: zeros.clone(),
            edx2: zeros,
        }
    }

    /// Applies one update to every parameter of `store`.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) -> Result<()> {
        for (id, param) in store.iter_mut() {
            let i = id.index();
            adadelta_update(
                param.data_mut(),
                grads.get(id).data(),
                self.eg2[i].data_mut(),
                self.edx2[i].data_mut(),
                self.rho,
                self.eps,
                self.lr,
            )?;
        }
        Ok(())
    }

    pub fn accumulators(&self) -> impl Iterator<Item = (&Tensor, &Tensor)> {
        self.eg2.iter().zip(&self.edx2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn first_step_closed_form() {
        let (mut p, mut eg2, mut edx2) = ([0.0], [0.0], [0.0]);
        adadelta_update(&mut p, &[1.0], &mut eg2, &mut edx2, 0.95, 1e-6, 1.0).unwrap();
        let expect = -(1e-6f64).sqrt() / 0.050001f64.sqrt();
        assert!((eg2[0] - 0.05).abs() < 1e-15);
        assert!((p[0] - expect).abs() < 1e-15);
        assert!((p[0] + 0.0044721).abs() < 1e-7);
    }

    #[test]
    fn zero_gradient_only_decays_history() {
        let (mut p, mut eg2, mut edx2) = ([1.25], [0.4], [0.2]);
        adadelta_update(&mut p, &[0.0], &mut eg2, &mut edx2, 0.95, 1e-6, 1.0).unwrap();
        assert_eq!(p[0], 1.25);
        assert!((eg2[0] - 0.38).abs() < 1e-15);
        assert!((edx2[0] - 0.19).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        let (mut p, mut eg2, mut edx2) = ([0.0; 2], [0.0; 2], [0.0; 2]);
        assert!(adadelta_update(&mut p, &[1.0], &mut eg2, &mut edx2, 0.95, 1e-6, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn moves_against_gradient_and_keeps_accumulators_nonnegative(
            steps in prop::collection::vec(-5.0f64..5.0, 1..30)
        ) {
            let (mut p, mut eg2, mut edx2) = ([0.0], [0.0], [0.0]);
            for g in steps {
                let before = p[0];
                adadelta_update(&mut p, &[g], &mut eg2, &mut edx2, 0.95, 1e-6, 1.0).unwrap();
                let moved = p[0] - before;
                if g != 0.0 {
                    prop_assert!(moved.signum() == -g.signum() || moved == 0.0);
                }
                prop_assert!(eg2[0] >= 0.0 && edx2[0] >= 0.0);
            }
        }
    }
}
