//! Reverse-mode automatic differentiation over a recorded operation graph.
//!
//! Every forward pass records primitive ops into a [`Graph`] in topological
//! order. [`Graph::backward`] replays the recording in reverse, visiting each
//! node exactly once and accumulating vector-Jacobian products into per-node
//! gradient buffers. One graph serves one training step.

use super::tensor::{
    gelu, gelu_grad_scalar, layer_norm, masked_softmax, Precision, Tensor, TensorError,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    /// Same shape, or `b` a `[1,n]` row broadcast.
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    Scale { a: NodeId, c: f64 },
    AddConst { a: NodeId, c: f64 },
    Matmul { a: NodeId, b: NodeId },
    /// `a @ b^T`.
    MatmulNT { a: NodeId, b: NodeId },
    Gelu { a: NodeId },
    Exp { a: NodeId },
    /// Row softmax of `a + mask`; the mask is a constant, not a node.
    MaskedSoftmax { a: NodeId, mask: Tensor },
    LayerNorm { x: NodeId, gain: NodeId, bias: NodeId, eps: f64 },
    /// Embedding lookup: stack `table` rows selected by `ids`.
    GatherRows { table: NodeId, ids: Vec<usize> },
    TakeRow { a: NodeId, row: usize },
    /// Copy of `a` with row `row` replaced by the `[1,n]` node `v`.
    SetRow { a: NodeId, row: usize, v: NodeId },
    /// `[times, n]` tensor whose every row is row `row` of `a`.
    TileRow { a: NodeId, row: usize, times: usize },
    ConcatCols { a: NodeId, b: NodeId },
    SliceCols { a: NodeId, start: usize, end: usize },
    SumAll { a: NodeId },
    /// Mean negative log-likelihood over the listed `(row, target)` pairs.
    CrossEntropyRows { logits: NodeId, targets: Vec<(usize, usize)> },
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Recorded forward computation plus per-node gradient accumulators.
pub struct Graph {
    nodes: Vec<Node>,
    precision: Precision,
}

impl Graph {
    pub fn new(precision: Precision) -> Self {
        Graph {
            nodes: Vec::new(),
            precision,
        }
    }

    pub fn precision(&self) -> Precision {
        self.precision
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
        let value = value.quantize(self.precision);
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op, value });
        id
    }

    /// Insert an input: a parameter or a constant. Both receive gradient
    /// accumulation; callers simply ignore gradients of constants.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        let id = NodeId(self.nodes.len());
        // Leaves are stored verbatim; parameters are already quantized.
        self.nodes.push(Node {
            op: Op::Leaf,
            value,
        });
        id
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        let v = self.value(a).add(self.value(b))?;
        Ok(self.push(Op::Add { a, b }, v))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        let v = self.value(a).sub(self.value(b))?;
        Ok(self.push(Op::Sub { a, b }, v))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        let v = self.value(a).mul(self.value(b))?;
        Ok(self.push(Op::Mul { a, b }, v))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a).scale(c);
        self.push(Op::Scale { a, c }, v)
    }

    pub fn add_const(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a).map(|x| x + c);
        self.push(Op::AddConst { a, c }, v)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::Matmul { a, b }, v))
    }

    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        let v = self.value(a).matmul_nt(self.value(b))?;
        Ok(self.push(Op::MatmulNT { a, b }, v))
    }

    pub fn gelu(&mut self, a: NodeId) -> NodeId {
        let v = gelu(self.value(a));
        self.push(Op::Gelu { a }, v)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::exp);
        self.push(Op::Exp { a }, v)
    }

    pub fn masked_softmax(&mut self, a: NodeId, mask: &Tensor) -> Result<NodeId, GraphError> {
        let v = masked_softmax(self.value(a), mask)?;
        Ok(self.push(
            Op::MaskedSoftmax {
                a,
                mask: mask.clone(),
            },
            v,
        ))
    }

    pub fn layer_norm(
        &mut self,
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
        eps: f64,
    ) -> Result<NodeId, GraphError> {
        let v = layer_norm(self.value(x), self.value(gain), self.value(bias), eps)?;
        Ok(self.push(Op::LayerNorm { x, gain, bias, eps }, v))
    }

    pub fn gather_rows(&mut self, table: NodeId, ids: &[usize]) -> NodeId {
        let t = self.value(table);
        let n = t.cols();
        let mut data = Vec::with_capacity(ids.len() * n);
        for &id in ids {
            data.extend_from_slice(t.row_slice(id));
        }
        let v = Tensor::new(vec![ids.len(), n], data).expect("gather shape");
        self.push(
            Op::GatherRows {
                table,
                ids: ids.to_vec(),
            },
            v,
        )
    }

    pub fn take_row(&mut self, a: NodeId, row: usize) -> NodeId {
        let v = Tensor::row(self.value(a).row_slice(row).to_vec());
        self.push(Op::TakeRow { a, row }, v)
    }

    pub fn set_row(&mut self, a: NodeId, row: usize, v: NodeId) -> NodeId {
        let base = self.value(a);
        let n = base.cols();
        let mut data = base.data().to_vec();
        data[row * n..(row + 1) * n].copy_from_slice(self.value(v).data());
        let out = Tensor::new(vec![base.rows(), n], data).expect("set_row shape");
        self.push(Op::SetRow { a, row, v }, out)
    }

    pub fn tile_row(&mut self, a: NodeId, row: usize, times: usize) -> NodeId {
        let src = self.value(a).row_slice(row).to_vec();
        let n = src.len();
        let mut data = Vec::with_capacity(times * n);
        for _ in 0..times {
            data.extend_from_slice(&src);
        }
        let v = Tensor::new(vec![times, n], data).expect("tile shape");
        self.push(Op::TileRow { a, row, times }, v)
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ta, tb) = (self.value(a), self.value(b));
        debug_assert_eq!(ta.rows(), tb.rows());
        let (r, ca, cb) = (ta.rows(), ta.cols(), tb.cols());
        let mut data = Vec::with_capacity(r * (ca + cb));
        for i in 0..r {
            data.extend_from_slice(ta.row_slice(i));
            data.extend_from_slice(tb.row_slice(i));
        }
        let v = Tensor::new(vec![r, ca + cb], data).expect("concat shape");
        self.push(Op::ConcatCols { a, b }, v)
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, end: usize) -> NodeId {
        let t = self.value(a);
        let r = t.rows();
        let mut data = Vec::with_capacity(r * (end - start));
        for i in 0..r {
            data.extend_from_slice(&t.row_slice(i)[start..end]);
        }
        let v = Tensor::new(vec![r, end - start], data).expect("slice shape");
        self.push(Op::SliceCols { a, start, end }, v)
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let v = Tensor::scalar(self.value(a).sum());
        self.push(Op::SumAll { a }, v)
    }

    /// Mean cross-entropy over `(row, target)` pairs of the logits tensor.
    pub fn cross_entropy_rows(
        &mut self,
        logits: NodeId,
        targets: &[(usize, usize)],
    ) -> Result<NodeId, GraphError> {
        if targets.is_empty() {
            return Err(GraphError::Tensor(TensorError::Invalid(
                "cross_entropy_rows requires at least one target".into(),
            )));
        }
        let t = self.value(logits);
        let mut total = 0.0;
        for &(row, target) in targets {
            total += nll_row(t.row_slice(row), target);
        }
        let v = Tensor::scalar(total / targets.len() as f64);
        Ok(self.push(
            Op::CrossEntropyRows {
                logits,
                targets: targets.to_vec(),
            },
            v,
        ))
    }

    /// `x @ w + b`.
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        let xw = self.matmul(x, w)?;
        self.add(xw, b)
    }

    /// Reverse pass from a scalar loss. Gradients are populated for every
    /// node on a path to the loss; all other nodes read back as zero.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients, GraphError> {
        let loss_val = self.value(loss);
        if !loss_val.is_scalar() {
            return Err(GraphError::NonScalarLoss(loss_val.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..self.nodes.len()).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.backward_op(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(grads: &mut [Option<Tensor>], id: NodeId, delta: Tensor) {
        match &mut grads[id.0] {
            Some(existing) => {
                for (e, d) in existing.data_mut().iter_mut().zip(delta.data()) {
                    *e += d;
                }
            }
            slot @ None => *slot = Some(delta),
        }
    }

    fn backward_op(&self, index: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        match &self.nodes[index].op {
            Op::Leaf => {}
            Op::Add { a, b } => {
                Self::accumulate(grads, *a, g.clone());
                let tb = self.value(*b);
                if tb.shape() == g.shape() {
                    Self::accumulate(grads, *b, g.clone());
                } else {
                    // Row broadcast: reduce over rows.
                    let n = tb.cols();
                    let mut db = vec![0.0; n];
                    for (i, v) in g.data().iter().enumerate() {
                        db[i % n] += v;
                    }
                    Self::accumulate(grads, *b, Tensor::row(db));
                }
            }
            Op::Sub { a, b } => {
                Self::accumulate(grads, *a, g.clone());
                Self::accumulate(grads, *b, g.scale(-1.0));
            }
            Op::Mul { a, b } => {
                let da = g.mul(self.value(*b)).expect("mul backward");
                let db = g.mul(self.value(*a)).expect("mul backward");
                Self::accumulate(grads, *a, da);
                Self::accumulate(grads, *b, db);
            }
            Op::Scale { a, c } => {
                Self::accumulate(grads, *a, g.scale(*c));
            }
            Op::AddConst { a, .. } => {
                Self::accumulate(grads, *a, g.clone());
            }
            Op::Matmul { a, b } => {
                // dA = dC @ B^T, dB = A^T @ dC
                let da = g.matmul_nt(self.value(*b)).expect("matmul backward");
                let db = self.value(*a).matmul_tn(g).expect("matmul backward");
                Self::accumulate(grads, *a, da);
                Self::accumulate(grads, *b, db);
            }
            Op::MatmulNT { a, b } => {
                // C = A @ B^T: dA = dC @ B, dB = dC^T @ A
                let da = g.matmul(self.value(*b)).expect("matmul_nt backward");
                let db = g.matmul_tn(self.value(*a)).expect("matmul_nt backward");
                Self::accumulate(grads, *a, da);
                Self::accumulate(grads, *b, db);
            }
            Op::Gelu { a } => {
                let x = self.value(*a);
                let mut d = g.clone();
                for (dv, xv) in d.data_mut().iter_mut().zip(x.data()) {
                    *dv *= gelu_grad_scalar(*xv);
                }
                Self::accumulate(grads, *a, d);
            }
            Op::Exp { a } => {
                let y = &self.nodes[index].value;
                let d = g.mul(y).expect("exp backward");
                Self::accumulate(grads, *a, d);
            }
            Op::MaskedSoftmax { a, .. } => {
                // ds = p * (dg - sum(dg * p)) per row; masked entries have p = 0.
                let p = &self.nodes[index].value;
                let (rows, cols) = (p.rows(), p.cols());
                let mut d = vec![0.0; rows * cols];
                for r in 0..rows {
                    let pr = p.row_slice(r);
                    let gr = g.row_slice(r);
                    let dot: f64 = pr.iter().zip(gr).map(|(p, g)| p * g).sum();
                    let dr = &mut d[r * cols..(r + 1) * cols];
                    for c in 0..cols {
                        dr[c] = pr[c] * (gr[c] - dot);
                    }
                }
                Self::accumulate(grads, *a, Tensor::new(vec![rows, cols], d).unwrap());
            }
            Op::LayerNorm { x, gain, bias, eps } => {
                let xt = self.value(*x);
                let gt = self.value(*gain);
                let n = xt.cols();
                let rows = xt.rows();
                let nf = n as f64;
                let mut dx = vec![0.0; rows * n];
                let mut dgain = vec![0.0; n];
                let mut dbias = vec![0.0; n];
                for r in 0..rows {
                    let xr = xt.row_slice(r);
                    let gr = g.row_slice(r);
                    let mean = xr.iter().sum::<f64>() / nf;
                    let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf;
                    let inv_std = 1.0 / (var + eps).sqrt();
                    // xhat and the two reduction terms
                    let mut sum_gdy = 0.0;
                    let mut sum_gdy_xhat = 0.0;
                    for c in 0..n {
                        let xhat = (xr[c] - mean) * inv_std;
                        let gdy = gt.data()[c] * gr[c];
                        sum_gdy += gdy;
                        sum_gdy_xhat += gdy * xhat;
                        dgain[c] += gr[c] * xhat;
                        dbias[c] += gr[c];
                    }
                    let dxr = &mut dx[r * n..(r + 1) * n];
                    for c in 0..n {
                        let xhat = (xr[c] - mean) * inv_std;
                        let gdy = gt.data()[c] * gr[c];
                        dxr[c] = inv_std * (gdy - sum_gdy / nf - xhat * sum_gdy_xhat / nf);
                    }
                }
                Self::accumulate(grads, *x, Tensor::new(vec![rows, n], dx).unwrap());
                Self::accumulate(grads, *gain, Tensor::row(dgain));
                Self::accumulate(grads, *bias, Tensor::row(dbias));
            }
            Op::GatherRows { table, ids } => {
                let t = self.value(*table);
                let n = t.cols();
                let mut dt = Tensor::zeros(vec![t.rows(), n]);
                for (out_row, &id) in ids.iter().enumerate() {
                    let src = &g.data()[out_row * n..(out_row + 1) * n];
                    let dst = &mut dt.data_mut()[id * n..(id + 1) * n];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += s;
                    }
                }
                Self::accumulate(grads, *table, dt);
            }
            Op::TakeRow { a, row } => {
                let t = self.value(*a);
                let n = t.cols();
                let mut da = Tensor::zeros(vec![t.rows(), n]);
                da.data_mut()[row * n..(row + 1) * n].copy_from_slice(g.data());
                Self::accumulate(grads, *a, da);
            }
            Op::SetRow { a, row, v } => {
                let n = self.value(*a).cols();
                let mut da = g.clone();
                da.data_mut()[row * n..(row + 1) * n].fill(0.0);
                Self::accumulate(grads, *a, da);
                Self::accumulate(grads, *v, Tensor::row(g.row_slice(*row).to_vec()));
            }
            Op::TileRow { a, row, times } => {
                let t = self.value(*a);
                let n = t.cols();
                let mut acc = vec![0.0; n];
                for r in 0..*times {
                    for (a_, g_) in acc.iter_mut().zip(g.row_slice(r)) {
                        *a_ += g_;
                    }
                }
                let mut da = Tensor::zeros(vec![t.rows(), n]);
                da.data_mut()[row * n..(row + 1) * n].copy_from_slice(&acc);
                Self::accumulate(grads, *a, da);
            }
            Op::ConcatCols { a, b } => {
                let (ca, cb) = (self.value(*a).cols(), self.value(*b).cols());
                let rows = g.rows();
                let mut da = Vec::with_capacity(rows * ca);
                let mut db = Vec::with_capacity(rows * cb);
                for r in 0..rows {
                    let gr = g.row_slice(r);
                    da.extend_from_slice(&gr[..ca]);
                    db.extend_from_slice(&gr[ca..]);
                }
                Self::accumulate(grads, *a, Tensor::new(vec![rows, ca], da).unwrap());
                Self::accumulate(grads, *b, Tensor::new(vec![rows, cb], db).unwrap());
            }
            Op::SliceCols { a, start, end } => {
                let t = self.value(*a);
                let (rows, cols) = (t.rows(), t.cols());
                let mut da = Tensor::zeros(vec![rows, cols]);
                for r in 0..rows {
                    let gr = g.row_slice(r);
                    da.data_mut()[r * cols + start..r * cols + end].copy_from_slice(gr);
                }
                Self::accumulate(grads, *a, da);
            }
            Op::SumAll { a } => {
                let s = g.scalar_value();
                let t = self.value(*a);
                Self::accumulate(grads, *a, Tensor::full(t.shape().to_vec(), s));
            }
            Op::CrossEntropyRows { logits, targets } => {
                let t = self.value(*logits);
                let (rows, cols) = (t.rows(), t.cols());
                let scale = g.scalar_value() / targets.len() as f64;
                let mut dl = Tensor::zeros(vec![rows, cols]);
                for &(row, target) in targets {
                    let lr = t.row_slice(row);
                    let max = lr.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let denom: f64 = lr.iter().map(|v| (v - max).exp()).sum();
                    let dst = &mut dl.data_mut()[row * cols..(row + 1) * cols];
                    for c in 0..cols {
                        let p = (lr[c] - max).exp() / denom;
                        dst[c] += scale * (p - if c == target { 1.0 } else { 0.0 });
                    }
                }
                Self::accumulate(grads, *logits, dl);
            }
        }
    }
}

/// Per-node gradients produced by [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn wrt(&self, id: NodeId) -> Option<&Tensor> {
        self.grads[id.index()].as_ref()
    }

    /// Gradient for `id`, or zeros of the node's shape if nothing flowed to it.
    pub fn wrt_or_zeros(&self, id: NodeId, graph: &Graph) -> Tensor {
        match self.wrt(id) {
            Some(t) => t.clone(),
            None => Tensor::zeros(graph.value(id).shape().to_vec()),
        }
    }
}

fn nll_row(logits: &[f64], target: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    lse - logits[target]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let mut g = Graph::new(Precision::F64);
        let x = g.leaf(Tensor::scalar(3.0));
        let y = g.mul(x, x).unwrap();
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.wrt(x).unwrap().scalar_value(), 6.0);
    }

    #[test]
    fn softmax_sum_gradient_is_zero() {
        let mut g = Graph::new(Precision::F64);
        let x = g.leaf(Tensor::row(vec![0.3, -1.0, 2.0, 0.7]));
        let mask = Tensor::row(vec![0.0; 4]);
        let p = g.masked_softmax(x, &mask).unwrap();
        let s = g.sum_all(p);
        let grads = g.backward(s).unwrap();
        for v in grads.wrt(x).unwrap().data() {
            assert!(v.abs() < 1e-12, "softmax-sum gradient should vanish, got {v}");
        }
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut g = Graph::new(Precision::F64);
        let x = g.leaf(Tensor::row(vec![1.0, 2.0]));
        let err = g.backward(x).unwrap_err();
        assert!(matches!(err, GraphError::NonScalarLoss(_)));
    }

    #[test]
    fn unreachable_leaf_reads_back_zero() {
        let mut g = Graph::new(Precision::F64);
        let x = g.leaf(Tensor::scalar(2.0));
        let unused = g.leaf(Tensor::row(vec![1.0, 1.0, 1.0]));
        let y = g.mul(x, x).unwrap();
        let grads = g.backward(y).unwrap();
        assert!(grads.wrt(unused).is_none());
        let z = grads.wrt_or_zeros(unused, &g);
        assert_eq!(z.data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn cross_entropy_uniform_logits() {
        let mut g = Graph::new(Precision::F64);
        let v = 7usize;
        let logits = g.leaf(Tensor::zeros(vec![2, v]));
        let loss = g
            .cross_entropy_rows(logits, &[(0, 3), (1, 0)])
            .unwrap();
        let expect = (v as f64).ln();
        assert!((g.value(loss).scalar_value() - expect).abs() < 1e-12);
    }

    #[test]
    fn gather_rows_accumulates_repeated_ids() {
        let mut g = Graph::new(Precision::F64);
        let table = g.leaf(Tensor::new(vec![3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let picked = g.gather_rows(table, &[1, 1, 2]);
        let s = g.sum_all(picked);
        let grads = g.backward(s).unwrap();
        let dt = grads.wrt(table).unwrap();
        assert_eq!(dt.data(), &[0.0, 0.0, 2.0, 2.0, 1.0, 1.0]);
    }

    #[test]
    fn set_row_splits_gradient() {
        let mut g = Graph::new(Precision::F64);
        let base = g.leaf(Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let v = g.leaf(Tensor::row(vec![10.0, 20.0]));
        let replaced = g.set_row(base, 0, v);
        assert_eq!(g.value(replaced).data(), &[10.0, 20.0, 3.0, 4.0]);
        let s = g.sum_all(replaced);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.wrt(base).unwrap().data(), &[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(grads.wrt(v).unwrap().data(), &[1.0, 1.0]);
    }

    #[test]
    fn tile_row_sums_gradient_back() {
        let mut g = Graph::new(Precision::F64);
        let a = g.leaf(Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let tiled = g.tile_row(a, 1, 3);
        assert_eq!(g.value(tiled).data(), &[3.0, 4.0, 3.0, 4.0, 3.0, 4.0]);
        let s = g.sum_all(tiled);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.wrt(a).unwrap().data(), &[0.0, 0.0, 3.0, 3.0]);
    }

    #[test]
    fn concat_slice_roundtrip_gradient() {
        let mut g = Graph::new(Precision::F64);
        let a = g.leaf(Tensor::new(vec![1, 2], vec![1.0, 2.0]).unwrap());
        let b = g.leaf(Tensor::new(vec![1, 3], vec![3.0, 4.0, 5.0]).unwrap());
        let cat = g.concat_cols(a, b);
        assert_eq!(g.value(cat).data(), &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let right = g.slice_cols(cat, 2, 5);
        let s = g.sum_all(right);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.wrt(a).unwrap().data(), &[0.0, 0.0]);
        assert_eq!(grads.wrt(b).unwrap().data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn f32_mode_quantizes_results() {
        let mut g = Graph::new(Precision::F32);
        let x = g.leaf(Tensor::scalar(0.1));
        let y = g.scale(x, 3.0);
        let v = g.value(y).scalar_value();
        assert_eq!(v, v as f32 as f64);
    }
}
