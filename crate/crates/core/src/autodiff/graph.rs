use std::collections::BTreeMap;

use super::{Gradients, ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Operation category, used for instrumentation and fault injection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    Input,
    Param,
    MatMul,
    Add,
    Sub,
    Mul,
    Concat,
    Tanh,
    Sigmoid,
    LogSoftmax,
    LogSumExp,
    Gather,
    Scale,
    Sum,
    AddN,
    AddColumn,
    LogSumExpCols,
}

#[derive(Clone, Debug)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Concat(NodeId, NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    LogSoftmax(NodeId),
    LogSumExp(NodeId),
    Gather { src: NodeId, indices: Vec<usize> },
    Scale(NodeId, f64),
    Sum(NodeId),
    AddN(Vec<NodeId>),
    AddColumn(NodeId, NodeId),
    LogSumExpCols(NodeId),
}

impl Op {
    fn kind(&self) -> OpKind {
        match self {
            Op::Input => OpKind::Input,
            Op::Param(_) => OpKind::Param,
            Op::MatMul(..) => OpKind::MatMul,
            Op::Add(..) => OpKind::Add,
            Op::Sub(..) => OpKind::Sub,
            Op::Mul(..) => OpKind::Mul,
            Op::Concat(..) => OpKind::Concat,
            Op::Tanh(_) => OpKind::Tanh,
            Op::Sigmoid(_) => OpKind::Sigmoid,
            Op::LogSoftmax(_) => OpKind::LogSoftmax,
            Op::LogSumExp(_) => OpKind::LogSumExp,
            Op::Gather { .. } => OpKind::Gather,
            Op::Scale(..) => OpKind::Scale,
            Op::Sum(_) => OpKind::Sum,
            Op::AddN(_) => OpKind::AddN,
            Op::AddColumn(..) => OpKind::AddColumn,
            Op::LogSumExpCols(_) => OpKind::LogSumExpCols,
        }
    }
}

struct Node {
    op: Op,
    /// Empty for parameter nodes; their value lives in the store.
    value: Tensor,
    requires_grad: bool,
}

/// A dynamically built computation graph over a borrowed parameter store.
///
/// Nodes are appended in creation order, so every parent has a smaller index
/// than its child and reverse index order is a valid topological order.
pub struct Graph<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<NodeId>>,
    grads: Vec<Option<Tensor>>,
    counts: BTreeMap<OpKind, usize>,
    fault: Option<OpKind>,
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

pub(crate) fn logsumexp_slice(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

impl<'p> Graph<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Self {
            store,
            nodes: Vec::new(),
            param_nodes: vec![None; store.len()],
            grads: Vec::new(),
            counts: BTreeMap::new(),
            fault: None,
        }
    }

    pub fn store(&self) -> &'p ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of operations recorded so far, per kind.
    pub fn op_counts(&self) -> &BTreeMap<OpKind, usize> {
        &self.counts
    }

    pub fn total_ops(&self) -> usize {
        self.counts.values().sum()
    }

    /// Parameters that have been read into this graph.
    pub fn params_read(&self) -> Vec<ParamId> {
        self.param_nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.map(|_| ParamId(i)))
            .collect()
    }

    /// Test fixture: scales the backward contribution of every op of `kind`
    /// by 1.5, producing a deliberately wrong gradient.
    #[doc(hidden)]
    pub fn inject_backward_fault(&mut self, kind: Option<OpKind>) {
        self.fault = kind;
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        let node = &self.nodes[id.0];
        match node.op {
            Op::Param(pid) => self.store.get(pid),
            _ => &node.value,
        }
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.value(id).item()
    }

    /// Gradient accumulated on a non-parameter node by [`Graph::backward`].
    /// Parameter gradients are written to the [`Gradients`] buffer instead.
    pub fn grad(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    fn push(&mut self, op: Op, value: Tensor) -> Result<NodeId> {
        let kind = op.kind();
        if !value.all_finite() {
            return Err(Error::Numeric(format!("{kind:?}")));
        }
        let requires_grad = match &op {
            Op::Input => false,
            Op::Param(_) => true,
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => {
                self.nodes[a.0].requires_grad || self.nodes[b.0].requires_grad
            }
            Op::Concat(a, b) | Op::AddColumn(a, b) => {
                self.nodes[a.0].requires_grad || self.nodes[b.0].requires_grad
            }
            Op::Tanh(a)
            | Op::Sigmoid(a)
            | Op::LogSoftmax(a)
            | Op::LogSumExp(a)
            | Op::Scale(a, _)
            | Op::Sum(a)
            | Op::LogSumExpCols(a) => self.nodes[a.0].requires_grad,
            Op::Gather { src, .. } => self.nodes[src.0].requires_grad,
            Op::AddN(xs) => xs.iter().any(|x| self.nodes[x.0].requires_grad),
        };
        *self.counts.entry(kind).or_insert(0) += 1;
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    /// Leaf holding a constant or differentiable input tensor.
    pub fn input(&mut self, value: Tensor, requires_grad: bool) -> NodeId {
        *self.counts.entry(OpKind::Input).or_insert(0) += 1;
        self.nodes.push(Node {
            op: Op::Input,
            value,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Leaf referring to a stored parameter; memoized per graph.
    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(n) = self.param_nodes[id.0] {
            return n;
        }
        *self.counts.entry(OpKind::Param).or_insert(0) += 1;
        self.nodes.push(Node {
            op: Op::Param(id),
            value: Tensor::zeros(&[1]),
            requires_grad: true,
        });
        let n = NodeId(self.nodes.len() - 1);
        self.param_nodes[id.0] = Some(n);
        n
    }

    /// `[m,n] x [n]` gives `[m]`; `[m,n] x [n,k]` gives `[m,k]`.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape().len() != 2 || av.cols() != bv.rows() {
            return Err(shape_err("matmul", av, bv));
        }
        let (m, n) = (av.rows(), av.cols());
        let value = if bv.is_vector() {
            let x = bv.data();
            let out = (0..m)
                .map(|r| {
                    av.row(r)
                        .iter()
                        .zip(x)
                        .map(|(w, x)| w * x)
                        .sum::<f64>()
                })
                .collect();
            Tensor::vector(out)
        } else {
            let k = bv.cols();
            let mut out = vec![0.0; m * k];
            for r in 0..m {
                let arow = av.row(r);
                let orow = &mut out[r * k..(r + 1) * k];
                for (j, &w) in arow.iter().enumerate().take(n) {
                    for (o, b) in orow.iter_mut().zip(bv.row(j)) {
                        *o += w * b;
                    }
                }
            }
            Tensor::new(vec![m, k], out)?
        };
        self.push(Op::MatMul(a, b), value)
    }

    fn elementwise(
        &mut self,
        name: &'static str,
        a: NodeId,
        b: NodeId,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(shape_err(name, av, bv));
        }
        let data = av
            .data()
            .iter()
            .zip(bv.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::new(av.shape().to_vec(), data)
    }

    fn unary(&self, a: NodeId, f: impl Fn(f64) -> f64) -> Tensor {
        let av = self.value(a);
        Tensor::new(av.shape().to_vec(), av.data().iter().map(|&x| f(x)).collect())
            .expect("same shape")
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.elementwise("add", a, b, |x, y| x + y)?;
        self.push(Op::Add(a, b), v)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.elementwise("sub", a, b, |x, y| x - y)?;
        self.push(Op::Sub(a, b), v)
    }

    /// Pointwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.elementwise("mul", a, b, |x, y| x * y)?;
        self.push(Op::Mul(a, b), v)
    }

    /// Concatenates two vectors.
    pub fn concat(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if !av.is_vector() || !bv.is_vector() {
            return Err(shape_err("concat", av, bv));
        }
        let mut data = av.data().to_vec();
        data.extend_from_slice(bv.data());
        self.push(Op::Concat(a, b), Tensor::vector(data))
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        let v = self.unary(a, f64::tanh);
        self.push(Op::Tanh(a), v)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        let v = self.unary(a, |x| {
            if x >= 0.0 {
                1.0 / (1.0 + (-x).exp())
            } else {
                let e = x.exp();
                e / (1.0 + e)
            }
        });
        self.push(Op::Sigmoid(a), v)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        let v = self.unary(a, |x| c * x);
        self.push(Op::Scale(a, c), v)
    }

    pub fn log_softmax(&mut self, a: NodeId) -> Result<NodeId> {
        let av = self.value(a);
        if !av.is_vector() {
            return Err(shape_err("log_softmax", av, av));
        }
        let lse = logsumexp_slice(av.data());
        let v = self.unary(a, |x| x - lse);
        self.push(Op::LogSoftmax(a), v)
    }

    /// Max-shifted log-sum-exp of a vector, returned as a scalar.
    pub fn logsumexp(&mut self, a: NodeId) -> Result<NodeId> {
        let av = self.value(a);
        if !av.is_vector() {
            return Err(shape_err("logsumexp", av, av));
        }
        let v = Tensor::scalar(logsumexp_slice(av.data()));
        self.push(Op::LogSumExp(a), v)
    }

    /// Collects entries of `src` at flat `indices` into a tensor of `shape`.
    pub fn gather(&mut self, src: NodeId, indices: Vec<usize>, shape: Vec<usize>) -> Result<NodeId> {
        let sv = self.value(src);
        if let Some(&bad) = indices.iter().find(|&&i| i >= sv.len()) {
            return Err(Error::Index {
                op: "gather",
                index: bad,
                len: sv.len(),
            });
        }
        let data = indices.iter().map(|&i| sv.data()[i]).collect();
        let v = Tensor::new(shape, data)?;
        self.push(Op::Gather { src, indices }, v)
    }

    /// Row `i` of a matrix as a vector.
    pub fn row_lookup(&mut self, m: NodeId, i: usize) -> Result<NodeId> {
        let mv = self.value(m);
        if mv.shape().len() != 2 {
            return Err(shape_err("row_lookup", mv, mv));
        }
        if i >= mv.rows() {
            return Err(Error::Index {
                op: "row_lookup",
                index: i,
                len: mv.rows(),
            });
        }
        let c = mv.cols();
        self.gather(m, (i * c..(i + 1) * c).collect(), vec![c])
    }

    /// Column `j` of a matrix as a vector.
    pub fn column(&mut self, m: NodeId, j: usize) -> Result<NodeId> {
        let mv = self.value(m);
        if mv.shape().len() != 2 {
            return Err(shape_err("column", mv, mv));
        }
        if j >= mv.cols() {
            return Err(Error::Index {
                op: "column",
                index: j,
                len: mv.cols(),
            });
        }
        let (r, c) = (mv.rows(), mv.cols());
        self.gather(m, (0..r).map(|i| i * c + j).collect(), vec![r])
    }

    /// Contiguous sub-vector `[start, start + len)`.
    pub fn slice(&mut self, v: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let n = self.value(v).len();
        if start + len > n || len == 0 {
            return Err(Error::Index {
                op: "slice",
                index: start + len,
                len: n,
            });
        }
        self.gather(v, (start..start + len).collect(), vec![len])
    }

    /// Rectangular sub-matrix starting at `(r0, c0)`.
    pub fn block(&mut self, m: NodeId, r0: usize, c0: usize, rows: usize, cols: usize) -> Result<NodeId> {
        let mv = self.value(m);
        if mv.shape().len() != 2 || r0 + rows > mv.rows() || c0 + cols > mv.cols() {
            return Err(Error::Shape {
                op: "block",
                left: mv.shape().to_vec(),
                right: vec![r0 + rows, c0 + cols],
            });
        }
        let c = mv.cols();
        let idx = (r0..r0 + rows)
            .flat_map(|r| (c0..c0 + cols).map(move |j| r * c + j))
            .collect();
        self.gather(m, idx, vec![rows, cols])
    }

    /// Single entry at flat index `k`, as a scalar.
    pub fn pick(&mut self, v: NodeId, k: usize) -> Result<NodeId> {
        self.gather(v, vec![k], vec![1])
    }

    /// Sum of all entries, as a scalar.
    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        let s = self.value(a).data().iter().sum();
        self.push(Op::Sum(a), Tensor::scalar(s))
    }

    /// Sum of equally shaped tensors.
    pub fn add_n(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        let first = *xs.first().ok_or(Error::Shape {
            op: "add_n",
            left: vec![],
            right: vec![],
        })?;
        let mut acc = self.value(first).clone();
        for &x in &xs[1..] {
            let xv = self.value(x);
            if xv.shape() != acc.shape() {
                return Err(shape_err("add_n", &acc, xv));
            }
            acc.add_assign(xv);
        }
        self.push(Op::AddN(xs.to_vec()), acc)
    }

    /// `out[i,j] = m[i,j] + v[i]`.
    pub fn add_column(&mut self, m: NodeId, v: NodeId) -> Result<NodeId> {
        let (mv, vv) = (self.value(m), self.value(v));
        if mv.shape().len() != 2 || !vv.is_vector() || vv.len() != mv.rows() {
            return Err(shape_err("add_column", mv, vv));
        }
        let c = mv.cols();
        let mut out = mv.clone();
        for (i, &x) in vv.data().iter().enumerate() {
            out.row_mut(i).iter_mut().for_each(|o| *o += x);
        }
        debug_assert_eq!(out.cols(), c);
        self.push(Op::AddColumn(m, v), out)
    }

    /// Column-wise log-sum-exp: `out[j] = logsumexp_i m[i,j]`.
    pub fn logsumexp_cols(&mut self, m: NodeId) -> Result<NodeId> {
        let mv = self.value(m);
        if mv.shape().len() != 2 {
            return Err(shape_err("logsumexp_cols", mv, mv));
        }
        let (r, c) = (mv.rows(), mv.cols());
        let out = (0..c)
            .map(|j| {
                let col: Vec<f64> = (0..r).map(|i| mv.data()[i * c + j]).collect();
                logsumexp_slice(&col)
            })
            .collect();
        self.push(Op::LogSumExpCols(m), Tensor::vector(out))
    }

    /// Reverse-mode sweep from a scalar `loss`.
    ///
    /// Gradients are added (`+=`) to the per-node buffers and to `param_grads`;
    /// a second call without zeroing doubles them.
    pub fn backward(&mut self, loss: NodeId, param_grads: &mut Gradients) -> Result<()> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(Error::Shape {
                op: "backward",
                left: lv.shape().to_vec(),
                right: vec![1],
            });
        }
        let n = loss.0 + 1;
        let mut local: Vec<Option<Tensor>> = vec![None; n];
        local[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..n).rev() {
            let Some(mut g) = local[i].take() else {
                continue;
            };
            if !self.nodes[i].requires_grad {
                continue;
            }
            if self.fault == Some(self.nodes[i].op.kind()) {
                g.data_mut().iter_mut().for_each(|x| *x *= 1.5);
            }
            self.propagate(i, &g, &mut local, param_grads);
            local[i] = Some(g);
        }

        if self.grads.len() < self.nodes.len() {
            self.grads.resize(self.nodes.len(), None);
        }
        for (i, g) in local.into_iter().enumerate() {
            let Some(g) = g else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad || matches!(node.op, Op::Param(_)) {
                continue;
            }
            match &mut self.grads[i] {
                Some(acc) => acc.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }
        Ok(())
    }

    /// Mutable gradient buffer for `id`, or `None` if it needs no gradient.
    fn slot<'a>(
        &self,
        id: NodeId,
        local: &'a mut [Option<Tensor>],
        param_grads: &'a mut Gradients,
    ) -> Option<&'a mut [f64]> {
        let node = &self.nodes[id.0];
        if !node.requires_grad {
            return None;
        }
        match node.op {
            Op::Param(pid) => Some(param_grads.get_mut(pid).data_mut()),
            _ => Some(
                local[id.0]
                    .get_or_insert_with(|| Tensor::zeros(node.value.shape()))
                    .data_mut(),
            ),
        }
    }

    fn propagate(
        &self,
        i: usize,
        g: &Tensor,
        local: &mut [Option<Tensor>],
        pg: &mut Gradients,
    ) {
        let gd = g.data();
        let out = &self.nodes[i].value;
        match &self.nodes[i].op {
            Op::Input | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, n) = (av.rows(), av.cols());
                let k = bv.cols();
                if bv.is_vector() {
                    let x = bv.data();
                    if let Some(da) = self.slot(*a, local, pg) {
                        // dA += g xᵀ
                        for (r, &gr) in gd.iter().enumerate() {
                            if gr != 0.0 {
                                let darow = &mut da[r * n..(r + 1) * n];
                                darow.iter_mut().zip(x).for_each(|(d, x)| *d += gr * x);
                            }
                        }
                    }
                    if let Some(db) = self.slot(*b, local, pg) {
                        // dx += Aᵀ g
                        for (r, &gr) in gd.iter().enumerate() {
                            if gr != 0.0 {
                                db.iter_mut().zip(av.row(r)).for_each(|(d, w)| *d += gr * w);
                            }
                        }
                    }
                    return;
                }
                if let Some(da) = self.slot(*a, local, pg) {
                    // dA += G Bᵀ
                    for r in 0..m {
                        let grow = &gd[r * k..(r + 1) * k];
                        let darow = &mut da[r * n..(r + 1) * n];
                        for (c, d) in darow.iter_mut().enumerate() {
                            let brow = &bv.data()[c * k..(c + 1) * k];
                            *d += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                        }
                    }
                }
                if let Some(db) = self.slot(*b, local, pg) {
                    // dB += Aᵀ G
                    for r in 0..m {
                        let arow = av.row(r);
                        let grow = &gd[r * k..(r + 1) * k];
                        for (c, &w) in arow.iter().enumerate() {
                            let dbrow = &mut db[c * k..(c + 1) * k];
                            for (d, &x) in dbrow.iter_mut().zip(grow) {
                                *d += w * x;
                            }
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                for (id, sign) in [(*a, 1.0), (*b, 1.0)] {
                    if let Some(d) = self.slot(id, local, pg) {
                        d.iter_mut().zip(gd).for_each(|(d, x)| *d += sign * x);
                    }
                }
            }
            Op::Sub(a, b) => {
                for (id, sign) in [(*a, 1.0), (*b, -1.0)] {
                    if let Some(d) = self.slot(id, local, pg) {
                        d.iter_mut().zip(gd).for_each(|(d, x)| *d += sign * x);
                    }
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if let Some(d) = self.slot(*a, local, pg) {
                    for ((d, x), y) in d.iter_mut().zip(gd).zip(bv.data()) {
                        *d += x * y;
                    }
                }
                if let Some(d) = self.slot(*b, local, pg) {
                    for ((d, x), y) in d.iter_mut().zip(gd).zip(av.data()) {
                        *d += x * y;
                    }
                }
            }
            Op::Concat(a, b) => {
                let split = self.value(*a).len();
                if let Some(d) = self.slot(*a, local, pg) {
                    d.iter_mut().zip(&gd[..split]).for_each(|(d, x)| *d += x);
                }
                if let Some(d) = self.slot(*b, local, pg) {
                    d.iter_mut().zip(&gd[split..]).for_each(|(d, x)| *d += x);
                }
            }
            Op::Tanh(a) => {
                if let Some(d) = self.slot(*a, local, pg) {
                    for ((d, x), y) in d.iter_mut().zip(gd).zip(out.data()) {
                        *d += x * (1.0 - y * y);
                    }
                }
            }
            Op::Sigmoid(a) => {
                if let Some(d) = self.slot(*a, local, pg) {
                    for ((d, x), y) in d.iter_mut().zip(gd).zip(out.data()) {
                        *d += x * y * (1.0 - y);
                    }
                }
            }
            Op::LogSoftmax(a) => {
                let total: f64 = gd.iter().sum();
                if let Some(d) = self.slot(*a, local, pg) {
                    for ((d, x), y) in d.iter_mut().zip(gd).zip(out.data()) {
                        *d += x - y.exp() * total;
                    }
                }
            }
            Op::LogSumExp(a) => {
                let lse = out.item();
                let av = self.value(*a);
                if let Some(d) = self.slot(*a, local, pg) {
                    for (d, v) in d.iter_mut().zip(av.data()) {
                        *d += gd[0] * (v - lse).exp();
                    }
                }
            }
            Op::Gather { src, indices } => {
                if let Some(d) = self.slot(*src, local, pg) {
                    for (&k, x) in indices.iter().zip(gd) {
                        d[k] += x;
                    }
                }
            }
            Op::Scale(a, c) => {
                if let Some(d) = self.slot(*a, local, pg) {
                    d.iter_mut().zip(gd).for_each(|(d, x)| *d += c * x);
                }
            }
            Op::Sum(a) => {
                if let Some(d) = self.slot(*a, local, pg) {
                    d.iter_mut().for_each(|d| *d += gd[0]);
                }
            }
            Op::AddN(xs) => {
                for &x in xs {
                    if let Some(d) = self.slot(x, local, pg) {
                        d.iter_mut().zip(gd).for_each(|(d, x)| *d += x);
                    }
                }
            }
            Op::AddColumn(m, v) => {
                let c = out.cols();
                if let Some(d) = self.slot(*m, local, pg) {
                    d.iter_mut().zip(gd).for_each(|(d, x)| *d += x);
                }
                if let Some(d) = self.slot(*v, local, pg) {
                    for (r, d) in d.iter_mut().enumerate() {
                        *d += gd[r * c..(r + 1) * c].iter().sum::<f64>();
                    }
                }
            }
            Op::LogSumExpCols(m) => {
                let mv = self.value(*m);
                let c = mv.cols();
                if let Some(d) = self.slot(*m, local, pg) {
                    for (k, (d, x)) in d.iter_mut().zip(mv.data()).enumerate() {
                        let j = k % c;
                        *d += gd[j] * (x - out.data()[j]).exp();
                    }
                }
            }
        }
    }
}
