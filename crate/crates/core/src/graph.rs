//! Reverse-mode autograd tape.
//!
//! Forward values are computed eagerly as nodes are appended, so a node's
//! index is always greater than its inputs' and the reverse node order is a
//! valid topological order for backpropagation. Parameters enter the tape
//! through [`Graph::param`], which caches one leaf per parameter per tape;
//! gradients come back in a [`GradBuffer`] keyed by [`ParamId`].

use alloc::vec::Vec;

use crate::error::{contract_err, shape_err, CoreError, Result};
use crate::nn;
use crate::params::{GradBuffer, ParamId, ParamStore};
use crate::rng::SplitMix64;
use crate::schema::AdjacencyMatrix;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(NodeId, NodeId),
    /// `A · Bᵀ` with `B` given untransposed.
    MatMulNt(NodeId, NodeId),
    Add(NodeId, NodeId),
    /// Matrix plus a `1×n` row vector broadcast over rows.
    AddRow(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    AddConst(NodeId),
    Relu(NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    MaskedSoftmax(NodeId),
    LayerNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        eps: f64,
    },
    ConcatRows(Vec<NodeId>),
    SliceRows(NodeId, usize, usize),
    ConcatCols(Vec<NodeId>),
    SliceCols(NodeId, usize, usize),
    GatherRows(NodeId, Vec<u32>),
    /// `1×s` row scattered into a `1×width` row by column index, additively.
    ScatterAddCols(NodeId, Vec<u32>),
    /// Multiply every entry by a `1×1` node.
    ScaleByScalar(NodeId, NodeId),
    SumAll(NodeId),
    /// `−log(max(p[idx], floor))` of a `1×n` distribution.
    NegLogPick(NodeId, usize),
    Reshape(NodeId),
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    param_nodes: Vec<Option<NodeId>>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op, value });
        id
    }

    /// Constant input; receives no gradient.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value)
    }

    /// Parameter leaf, cached so each parameter appears once per tape and
    /// shared uses (e.g. the embedding table) accumulate into one gradient.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        if self.param_nodes.len() <= id.index() {
            self.param_nodes.resize(id.index() + 1, None);
        }
        if let Some(node) = self.param_nodes[id.index()] {
            return node;
        }
        let node = self.push(Op::Param(id), store.value(id).clone());
        self.param_nodes[id.index()] = Some(node);
        node
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), v))
    }

    /// `a · bᵀ` without materializing the transpose.
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).matmul_nt(self.value(b))?;
        Ok(self.push(Op::MatMulNt(a, b), v))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).add(self.value(b))?;
        Ok(self.push(Op::Add(a, b), v))
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        let v = self.value(a).add_row_broadcast(self.value(row))?;
        Ok(self.push(Op::AddRow(a, row), v))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).hadamard(self.value(b))?;
        Ok(self.push(Op::Mul(a, b), v))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a).scale(c);
        self.push(Op::Scale(a, c), v)
    }

    pub fn add_const(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a).map(|x| x + c);
        self.push(Op::AddConst(a), v)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(nn::relu);
        self.push(Op::Relu(a), v)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(crate::math::tanh);
        self.push(Op::Tanh(a), v)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(crate::math::sigmoid);
        self.push(Op::Sigmoid(a), v)
    }

    pub fn masked_softmax(&mut self, a: NodeId, mask: Option<&AdjacencyMatrix>) -> Result<NodeId> {
        let v = nn::masked_softmax(self.value(a), mask)?;
        Ok(self.push(Op::MaskedSoftmax(a), v))
    }

    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        self.masked_softmax(a, None)
    }

    pub fn layer_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId, eps: f64) -> Result<NodeId> {
        let v = nn::layer_norm(self.value(x), self.value(gamma), self.value(beta), eps)?;
        Ok(self.push(Op::LayerNorm { x, gamma, beta, eps }, v))
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(contract_err("concat_rows", "no parts"));
        }
        let cols = self.value(parts[0]).cols();
        let mut rows = 0;
        for &p in parts {
            if self.value(p).cols() != cols {
                return Err(shape_err("concat_rows", "column counts differ"));
            }
            rows += self.value(p).rows();
        }
        let mut data = Vec::with_capacity(rows * cols);
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
        }
        let v = Tensor::from_vec(rows, cols, data)?;
        Ok(self.push(Op::ConcatRows(parts.to_vec()), v))
    }

    pub fn slice_rows(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let v = self.value(a).slice_rows(start, len)?;
        Ok(self.push(Op::SliceRows(a, start, len), v))
    }

    pub fn row(&mut self, a: NodeId, r: usize) -> Result<NodeId> {
        self.slice_rows(a, r, 1)
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(contract_err("concat_cols", "no parts"));
        }
        let rows = self.value(parts[0]).rows();
        let mut cols = 0;
        for &p in parts {
            if self.value(p).rows() != rows {
                return Err(shape_err("concat_cols", "row counts differ"));
            }
            cols += self.value(p).cols();
        }
        let mut out = Tensor::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let t = self.value(p);
            for r in 0..rows {
                let src = t.row(r);
                out.row_mut(r)[offset..offset + src.len()].copy_from_slice(src);
            }
            offset += t.cols();
        }
        Ok(self.push(Op::ConcatCols(parts.to_vec()), out))
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let v = self.value(a).slice_cols(start, len)?;
        Ok(self.push(Op::SliceCols(a, start, len), v))
    }

    pub fn gather_rows(&mut self, a: NodeId, ids: &[u32]) -> Result<NodeId> {
        let t = self.value(a);
        let mut out = Tensor::zeros(ids.len(), t.cols());
        for (r, &id) in ids.iter().enumerate() {
            if id as usize >= t.rows() {
                return Err(CoreError::IndexOutOfRange {
                    op: "gather_rows",
                    index: id as usize,
                    len: t.rows(),
                });
            }
            out.row_mut(r).copy_from_slice(t.row(id as usize));
        }
        Ok(self.push(Op::GatherRows(a, ids.to_vec()), out))
    }

    /// Scatter a `1×s` row additively into a `1×width` row: entry `i` lands
    /// on column `ids[i]`. Linear in its input, so the backward pass is a
    /// plain gather.
    pub fn scatter_add_cols(&mut self, a: NodeId, ids: &[u32], width: usize) -> Result<NodeId> {
        let t = self.value(a);
        if t.rows() != 1 || t.cols() != ids.len() {
            return Err(shape_err(
                "scatter_add_cols",
                alloc::format!("input {:?} vs {} ids", t.shape(), ids.len()),
            ));
        }
        let mut out = Tensor::zeros(1, width);
        for (i, &id) in ids.iter().enumerate() {
            if id as usize >= width {
                return Err(CoreError::IndexOutOfRange {
                    op: "scatter_add_cols",
                    index: id as usize,
                    len: width,
                });
            }
            out.data_mut()[id as usize] += t.data()[i];
        }
        Ok(self.push(Op::ScatterAddCols(a, ids.to_vec()), out))
    }

    pub fn scale_by_scalar(&mut self, a: NodeId, s: NodeId) -> Result<NodeId> {
        let sv = self.value(s).item()?;
        let v = self.value(a).scale(sv);
        Ok(self.push(Op::ScaleByScalar(a, s), v))
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let v = Tensor::scalar(self.value(a).sum());
        self.push(Op::SumAll(a), v)
    }

    /// Cross-entropy against a one-hot target given as an index, with the
    /// probability floored before the log.
    pub fn neg_log_pick(&mut self, a: NodeId, idx: usize) -> Result<NodeId> {
        let t = self.value(a);
        if t.rows() != 1 {
            return Err(shape_err("neg_log_pick", "expected a 1×n distribution"));
        }
        if idx >= t.cols() {
            return Err(CoreError::IndexOutOfRange {
                op: "neg_log_pick",
                index: idx,
                len: t.cols(),
            });
        }
        let v = Tensor::scalar(nn::neg_log_prob(t.data()[idx]));
        Ok(self.push(Op::NegLogPick(a, idx), v))
    }

    pub fn reshape(&mut self, a: NodeId, rows: usize, cols: usize) -> Result<NodeId> {
        let v = self.value(a).reshape(rows, cols)?;
        Ok(self.push(Op::Reshape(a), v))
    }

    /// Inverted dropout: each entry is zeroed with probability `rate`,
    /// survivors are scaled by `1/(1−rate)`. `rate == 0` is the identity.
    pub fn dropout(&mut self, a: NodeId, rate: f64, rng: &mut SplitMix64) -> Result<NodeId> {
        if rate == 0.0 {
            return Ok(a);
        }
        if !(0.0..1.0).contains(&rate) {
            return Err(contract_err("dropout", "rate must be in [0, 1)"));
        }
        let t = self.value(a);
        let keep = 1.0 / (1.0 - rate);
        let mask_data: Vec<f64> = (0..t.len())
            .map(|_| if rng.next_f64() < rate { 0.0 } else { keep })
            .collect();
        let mask = self.leaf(Tensor::from_vec(t.rows(), t.cols(), mask_data)?);
        self.mul(a, mask)
    }

    /// Mean over rows, returning `1×n`.
    pub fn mean_rows(&mut self, a: NodeId) -> Result<NodeId> {
        let t = self.value(a);
        if t.rows() == 0 {
            return Err(contract_err("mean_rows", "empty tensor"));
        }
        let scaled = self.sum_rows_internal(a);
        Ok(self.scale(scaled, 1.0 / (self.value(a).rows() as f64)))
    }

    fn sum_rows_internal(&mut self, a: NodeId) -> NodeId {
        // Expressed as onesᵀ·A so it needs no dedicated backward rule.
        let rows = self.value(a).rows();
        let ones = self.leaf(Tensor::filled(1, rows, 1.0));
        self.matmul(ones, a).expect("shape checked")
    }

    /// Reverse pass from a scalar loss node. Returns per-parameter
    /// gradients; constants and untouched parameters receive none.
    pub fn backward(&self, store: &ParamStore, loss: NodeId) -> Result<GradBuffer> {
        if self.value(loss).shape() != [1, 1] {
            return Err(contract_err("backward", "loss must be a 1×1 scalar"));
        }
        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        grads[loss.0] = Some(Tensor::scalar(1.0));
        let mut out = GradBuffer::new(store.len());

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Leaf => {}
                Op::Param(pid) => out.add(*pid, &g)?,
                Op::MatMul(a, b) => {
                    let da = g.matmul_nt(self.value(*b))?;
                    let db = self.value(*a).matmul_tn(&g)?;
                    acc(&mut grads, *a, da)?;
                    acc(&mut grads, *b, db)?;
                }
                Op::MatMulNt(a, b) => {
                    let da = g.matmul(self.value(*b))?;
                    let db = g.matmul_tn(self.value(*a))?;
                    acc(&mut grads, *a, da)?;
                    acc(&mut grads, *b, db)?;
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone())?;
                    acc(&mut grads, *b, g)?;
                }
                Op::AddRow(a, row) => {
                    let mut drow = Tensor::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (d, &v) in drow.data_mut().iter_mut().zip(g.row(r).iter()) {
                            *d += v;
                        }
                    }
                    acc(&mut grads, *a, g)?;
                    acc(&mut grads, *row, drow)?;
                }
                Op::Mul(a, b) => {
                    let da = g.hadamard(self.value(*b))?;
                    let db = g.hadamard(self.value(*a))?;
                    acc(&mut grads, *a, da)?;
                    acc(&mut grads, *b, db)?;
                }
                Op::Scale(a, c) => acc(&mut grads, *a, g.scale(*c))?,
                Op::AddConst(a) => acc(&mut grads, *a, g)?,
                Op::Relu(a) => {
                    let x = self.value(*a);
                    let mut da = g.clone();
                    for (d, &xv) in da.data_mut().iter_mut().zip(x.data().iter()) {
                        if xv <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    acc(&mut grads, *a, da)?;
                }
                Op::Tanh(a) => {
                    let y = &self.nodes[i].value;
                    let mut da = g.clone();
                    for (d, &yv) in da.data_mut().iter_mut().zip(y.data().iter()) {
                        *d *= 1.0 - yv * yv;
                    }
                    acc(&mut grads, *a, da)?;
                }
                Op::Sigmoid(a) => {
                    let y = &self.nodes[i].value;
                    let mut da = g.clone();
                    for (d, &yv) in da.data_mut().iter_mut().zip(y.data().iter()) {
                        *d *= yv * (1.0 - yv);
                    }
                    acc(&mut grads, *a, da)?;
                }
                Op::MaskedSoftmax(a) => {
                    // dx = p ∘ (g − ⟨g, p⟩) per row; masked entries have p = 0
                    // and thus zero gradient, fully-masked rows stay zero.
                    let p = &self.nodes[i].value;
                    let mut da = Tensor::zeros(p.rows(), p.cols());
                    for r in 0..p.rows() {
                        let (p_row, g_row) = (p.row(r), g.row(r));
                        let dot: f64 = p_row.iter().zip(g_row.iter()).map(|(p, g)| p * g).sum();
                        for (d, (&pv, &gv)) in
                            da.row_mut(r).iter_mut().zip(p_row.iter().zip(g_row.iter()))
                        {
                            *d = pv * (gv - dot);
                        }
                    }
                    acc(&mut grads, *a, da)?;
                }
                Op::LayerNorm { x, gamma, beta, eps } => {
                    let (dx, dgamma, dbeta) =
                        layer_norm_backward(self.value(*x), self.value(*gamma), &g, *eps);
                    acc(&mut grads, *x, dx)?;
                    acc(&mut grads, *gamma, dgamma)?;
                    acc(&mut grads, *beta, dbeta)?;
                }
                Op::ConcatRows(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let len = self.value(p).rows();
                        acc(&mut grads, p, g.slice_rows(start, len)?)?;
                        start += len;
                    }
                }
                Op::SliceRows(a, start, len) => {
                    let src = self.value(*a);
                    let mut da = Tensor::zeros(src.rows(), src.cols());
                    for r in 0..*len {
                        da.row_mut(start + r).copy_from_slice(g.row(r));
                    }
                    acc(&mut grads, *a, da)?;
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let len = self.value(p).cols();
                        acc(&mut grads, p, g.slice_cols(start, len)?)?;
                        start += len;
                    }
                }
                Op::SliceCols(a, start, len) => {
                    let src = self.value(*a);
                    let mut da = Tensor::zeros(src.rows(), src.cols());
                    for r in 0..g.rows() {
                        da.row_mut(r)[*start..start + len].copy_from_slice(g.row(r));
                    }
                    acc(&mut grads, *a, da)?;
                }
                Op::GatherRows(a, ids) => {
                    let src = self.value(*a);
                    let mut da = Tensor::zeros(src.rows(), src.cols());
                    for (r, &id) in ids.iter().enumerate() {
                        let dst = da.row_mut(id as usize);
                        for (d, &v) in dst.iter_mut().zip(g.row(r).iter()) {
                            *d += v;
                        }
                    }
                    acc(&mut grads, *a, da)?;
                }
                Op::ScatterAddCols(a, ids) => {
                    let mut da = Tensor::zeros(1, ids.len());
                    for (i2, &id) in ids.iter().enumerate() {
                        da.data_mut()[i2] = g.data()[id as usize];
                    }
                    acc(&mut grads, *a, da)?;
                }
                Op::ScaleByScalar(a, s) => {
                    let sv = self.value(*s).item()?;
                    let dot: f64 = g
                        .data()
                        .iter()
                        .zip(self.value(*a).data().iter())
                        .map(|(g, a)| g * a)
                        .sum();
                    acc(&mut grads, *a, g.scale(sv))?;
                    acc(&mut grads, *s, Tensor::scalar(dot))?;
                }
                Op::SumAll(a) => {
                    let gv = g.item()?;
                    let src = self.value(*a);
                    acc(&mut grads, *a, Tensor::filled(src.rows(), src.cols(), gv))?;
                }
                Op::NegLogPick(a, idx) => {
                    let p = self.value(*a).data()[*idx];
                    let src = self.value(*a);
                    let mut da = Tensor::zeros(1, src.cols());
                    if p > nn::PROB_FLOOR {
                        da.data_mut()[*idx] = -g.item()? / p;
                    }
                    acc(&mut grads, *a, da)?;
                }
                Op::Reshape(a) => {
                    let src = self.value(*a);
                    acc(&mut grads, *a, g.reshape(src.rows(), src.cols())?)?;
                }
            }
        }
        Ok(out)
    }
}

fn acc(grads: &mut [Option<Tensor>], id: NodeId, g: Tensor) -> Result<()> {
    match &mut grads[id.0] {
        Some(existing) => existing.add_assign(&g),
        slot => {
            *slot = Some(g);
            Ok(())
        }
    }
}

/// Backward of row-wise layer normalization with population variance.
fn layer_norm_backward(x: &Tensor, gamma: &Tensor, g: &Tensor, eps: f64) -> (Tensor, Tensor, Tensor) {
    let d = x.cols();
    let mut dx = Tensor::zeros(x.rows(), d);
    let mut dgamma = Tensor::zeros(1, d);
    let mut dbeta = Tensor::zeros(1, d);
    for r in 0..x.rows() {
        let row = x.row(r);
        let g_row = g.row(r);
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let inv_std = 1.0 / crate::math::sqrt(var + eps);
        // xhat_i = (x_i − μ)·inv_std;  u_i = γ_i·g_i·inv_std
        let mut mean_u = 0.0;
        let mut mean_u_xhat = 0.0;
        for i in 0..d {
            let xhat = (row[i] - mean) * inv_std;
            let u = gamma.data()[i] * g_row[i] * inv_std;
            mean_u += u;
            mean_u_xhat += u * xhat;
            dgamma.data_mut()[i] += g_row[i] * xhat;
            dbeta.data_mut()[i] += g_row[i];
        }
        mean_u /= d as f64;
        mean_u_xhat /= d as f64;
        let dx_row = dx.row_mut(r);
        for i in 0..d {
            let xhat = (row[i] - mean) * inv_std;
            let u = gamma.data()[i] * g_row[i] * inv_std;
            dx_row[i] = u - mean_u - xhat * mean_u_xhat;
        }
    }
    (dx, dgamma, dbeta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eager_forward_values() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::from_vec(1, 2, vec![1.0, 2.0]).unwrap());
        let b = g.leaf(Tensor::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.value(c).data(), &[1.0, 2.0]);
    }

    #[test]
    fn param_nodes_are_cached() {
        let mut store = ParamStore::new();
        let w = store.register("w", Tensor::zeros(2, 2)).unwrap();
        let mut g = Graph::new();
        let n1 = g.param(&store, w);
        let n2 = g.param(&store, w);
        assert_eq!(n1, n2);
        assert_eq!(g.len(), 1);
    }

    #[test]
    fn shared_param_grad_accumulates_once_per_use() {
        // loss = sum(w) + sum(w) → dw = 2 everywhere
        let mut store = ParamStore::new();
        let w = store.register("w", Tensor::filled(2, 2, 1.0)).unwrap();
        let mut g = Graph::new();
        let wn = g.param(&store, w);
        let s1 = g.sum_all(wn);
        let s2 = g.sum_all(wn);
        let loss = g.add(s1, s2).unwrap();
        let grads = g.backward(&store, loss).unwrap();
        assert_eq!(grads.get(w).unwrap().data(), &[2.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn backward_requires_scalar_loss() {
        let mut store = ParamStore::new();
        let w = store.register("w", Tensor::zeros(2, 2)).unwrap();
        let mut g = Graph::new();
        let n = g.param(&store, w);
        assert!(g.backward(&store, n).is_err());
    }

    #[test]
    fn quadratic_gradient_exact() {
        // f(x) = sum(x∘x), df/dx = 2x
        let mut store = ParamStore::new();
        let x = store
            .register("x", Tensor::from_vec(1, 3, vec![3.0, -1.0, 0.5]).unwrap())
            .unwrap();
        let mut g = Graph::new();
        let xn = g.param(&store, x);
        let sq = g.mul(xn, xn).unwrap();
        let loss = g.sum_all(sq);
        let grads = g.backward(&store, loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[6.0, -2.0, 1.0]);
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let mut store = ParamStore::new();
        let x = store.register("x", Tensor::scalar(2.0)).unwrap();
        let mut g = Graph::new();
        let _xn = g.param(&store, x);
        let c = g.leaf(Tensor::scalar(5.0));
        let loss = g.sum_all(c);
        let grads = g.backward(&store, loss).unwrap();
        assert!(grads.get(x).is_none());
    }

    #[test]
    fn dropout_zero_rate_is_identity() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::filled(2, 2, 3.0));
        let mut rng = SplitMix64::new(1);
        let d = g.dropout(a, 0.0, &mut rng).unwrap();
        assert_eq!(d, a);
    }

    #[test]
    fn scatter_add_cols_merges_duplicate_ids() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::from_vec(1, 3, vec![0.2, 0.3, 0.5]).unwrap());
        let out = g.scatter_add_cols(a, &[1, 1, 4], 5).unwrap();
        assert_eq!(g.value(out).data(), &[0.0, 0.5, 0.0, 0.0, 0.5]);
    }
}
