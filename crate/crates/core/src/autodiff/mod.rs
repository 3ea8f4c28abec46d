//! Minimal reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Graph`] is rebuilt for every sentence. Parameters stay in a
//! [`ParamStore`] that the graph borrows; `backward` writes their gradients
//! into a [`Gradients`] buffer so per-sentence graphs never copy weights.

mod gradcheck;
mod graph;
mod params;
mod tensor;

pub use gradcheck::{grad_check, grad_check_with_fault, relative_error, GradCheckReport, ParamCheck};
pub use graph::{Graph, NodeId, OpKind};
pub(crate) use graph::logsumexp_slice;
pub use params::{Gradients, ParamId, ParamStore};
pub use tensor::Tensor;
