//! Recorded computation graph with reverse-mode differentiation.
//!
//! Gradients are built as new graph nodes, so a gradient can itself be
//! differentiated. The softmax family uses fused first-order kernels whose
//! own derivatives are not available.

use rand::Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Const,
    MatMul { a: Var, b: Var, ta: bool, tb: bool },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    /// `1 x c` repeated to `n x c`.
    BroadcastRows(Var),
    /// `n x 1` repeated to `n x c`.
    BroadcastCols(Var),
    /// `n x c` summed to `1 x c`.
    SumRows(Var),
    /// `n x c` summed to `n x 1`.
    SumCols(Var),
    LeakyRelu(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Exp(Var),
    Log(Var),
    Sqrt(Var),
    Recip(Var),
    ConcatCols(Vec<Var>),
    SliceCols { x: Var, start: usize },
    PadCols { x: Var, left: usize },
    Softmax(Var),
    LogSoftmax(Var),
    Softplus(Var),
    SoftmaxVjp { y: Var, g: Var },
    LogSoftmaxVjp { y: Var, g: Var },
    SoftplusVjp { x: Var, g: Var },
}

impl Op {
    fn parents(&self) -> Vec<Var> {
        use Op::*;
        match self {
            Leaf | Const => vec![],
            MatMul { a, b, .. } => vec![*a, *b],
            Add(a, b) | Sub(a, b) | Mul(a, b) => vec![*a, *b],
            Scale(x, _) | LeakyRelu(x, _) => vec![*x],
            AddScalar(x) => vec![*x],
            BroadcastRows(x) | BroadcastCols(x) | SumRows(x) | SumCols(x) => vec![*x],
            Tanh(x) | Sigmoid(x) | Exp(x) | Log(x) | Sqrt(x) | Recip(x) => vec![*x],
            Softmax(x) | LogSoftmax(x) | Softplus(x) => vec![*x],
            ConcatCols(xs) => xs.clone(),
            SliceCols { x, .. } | PadCols { x, .. } => vec![*x],
            SoftmaxVjp { y, g } | LogSoftmaxVjp { y, g } => vec![*y, *g],
            SoftplusVjp { x, g } => vec![*x, *g],
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default, Clone)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn row_softmax(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for i in 0..out.rows {
        let row = out.row_mut(i);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            s += *v;
        }
        for v in row.iter_mut() {
            *v /= s;
        }
    }
    out
}

fn row_log_softmax(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for i in 0..out.rows {
        let row = out.row_mut(i);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        for v in row.iter_mut() {
            *v -= lse;
        }
    }
    out
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// A differentiable input (parameter or point of evaluation).
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Const)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).shape()
    }

    fn unary(&mut self, x: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let value = self.value(x).map(f);
        self.push(value, op)
    }

    fn binary(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Var {
        let value = self.value(a).zip(self.value(b), f);
        self.push(value, op)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        self.matmul_t(a, b, false, false)
    }

    /// `op(a) * op(b)` with optional transposes.
    pub fn matmul_t(&mut self, a: Var, b: Var, ta: bool, tb: bool) -> Var {
        let value = Tensor::matmul(self.value(a), self.value(b), ta, tb);
        self.push(value, Op::MatMul { a, b, ta, tb })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn scale(&mut self, x: Var, k: f64) -> Var {
        self.unary(x, Op::Scale(x, k), |v| v * k)
    }

    pub fn add_scalar(&mut self, x: Var, k: f64) -> Var {
        self.unary(x, Op::AddScalar(x), |v| v + k)
    }

    pub fn broadcast_rows(&mut self, x: Var, n: usize) -> Var {
        let t = self.value(x);
        assert_eq!(t.rows, 1, "broadcast_rows expects a row vector");
        let mut data = Vec::with_capacity(n * t.cols);
        for _ in 0..n {
            data.extend_from_slice(&t.data);
        }
        let value = Tensor::from_vec(n, t.cols, data);
        self.push(value, Op::BroadcastRows(x))
    }

    pub fn broadcast_cols(&mut self, x: Var, c: usize) -> Var {
        let t = self.value(x);
        assert_eq!(t.cols, 1, "broadcast_cols expects a column vector");
        let data = t.data.iter().flat_map(|&v| std::iter::repeat_n(v, c)).collect();
        let value = Tensor::from_vec(t.rows, c, data);
        self.push(value, Op::BroadcastCols(x))
    }

    pub fn sum_rows(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let mut out = vec![0.0; t.cols];
        for i in 0..t.rows {
            for (o, v) in out.iter_mut().zip(t.row(i)) {
                *o += v;
            }
        }
        let value = Tensor::row_vector(out);
        self.push(value, Op::SumRows(x))
    }

    pub fn sum_cols(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let data = (0..t.rows).map(|i| t.row(i).iter().sum()).collect();
        let value = Tensor::from_vec(t.rows, 1, data);
        self.push(value, Op::SumCols(x))
    }

    /// Adds a `1 x c` row to every row of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Var {
        let n = self.shape(x).0;
        let b = self.broadcast_rows(row, n);
        self.add(x, b)
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let r = self.sum_rows(x);
        self.sum_cols(r)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = self.value(x).len() as f64;
        let s = self.sum_all(x);
        self.scale(s, 1.0 / n)
    }

    /// Column means over rows, `1 x c`.
    pub fn mean_rows(&mut self, x: Var) -> Var {
        let n = self.shape(x).0 as f64;
        let s = self.sum_rows(x);
        self.scale(s, 1.0 / n)
    }

    /// Row means over columns, `n x 1`.
    pub fn mean_cols(&mut self, x: Var) -> Var {
        let c = self.shape(x).1 as f64;
        let s = self.sum_cols(x);
        self.scale(s, 1.0 / c)
    }

    /// Population variance of every column over rows, `1 x c`.
    pub fn variance_rows(&mut self, x: Var) -> Var {
        let n = self.shape(x).0;
        let m = self.mean_rows(x);
        let mb = self.broadcast_rows(m, n);
        let d = self.sub(x, mb);
        let d2 = self.mul(d, d);
        self.mean_rows(d2)
    }

    /// Population variance of all elements, `1 x 1`.
    pub fn variance(&mut self, x: Var) -> Var {
        let (r, c) = self.shape(x);
        let m = self.mean(x);
        let mr = self.broadcast_rows(m, r);
        let mb = self.broadcast_cols(mr, c);
        let d = self.sub(x, mb);
        let d2 = self.mul(d, d);
        self.mean(d2)
    }

    /// Euclidean norm of each row, `n x 1`; `eps` keeps the derivative
    /// finite at zero.
    pub fn l2_norm_rows(&mut self, x: Var, eps: f64) -> Var {
        let x2 = self.mul(x, x);
        let s = self.sum_cols(x2);
        let s = self.add_scalar(s, eps);
        self.sqrt(s)
    }

    /// Euclidean norm of all elements, `1 x 1`.
    pub fn l2_norm(&mut self, x: Var, eps: f64) -> Var {
        let x2 = self.mul(x, x);
        let s = self.sum_all(x2);
        let s = self.add_scalar(s, eps);
        self.sqrt(s)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        self.unary(x, Op::LeakyRelu(x, slope), |v| if v > 0.0 { v } else { slope * v })
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.leaky_relu(x, 0.0)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, Op::Tanh(x), f64::tanh)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, Op::Sigmoid(x), sigmoid)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(x, Op::Exp(x), f64::exp)
    }

    pub fn log(&mut self, x: Var) -> Var {
        self.unary(x, Op::Log(x), f64::ln)
    }

    pub fn sqrt(&mut self, x: Var) -> Var {
        self.unary(x, Op::Sqrt(x), f64::sqrt)
    }

    pub fn recip(&mut self, x: Var) -> Var {
        self.unary(x, Op::Recip(x), f64::recip)
    }

    pub fn softplus(&mut self, x: Var) -> Var {
        self.unary(x, Op::Softplus(x), softplus)
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, x: Var) -> Var {
        let value = row_softmax(self.value(x));
        self.push(value, Op::Softmax(x))
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(&mut self, x: Var) -> Var {
        let value = row_log_softmax(self.value(x));
        self.push(value, Op::LogSoftmax(x))
    }

    pub fn concat_cols(&mut self, xs: &[Var]) -> Var {
        assert!(!xs.is_empty(), "concat of nothing");
        let rows = self.shape(xs[0]).0;
        let cols: usize = xs.iter().map(|&x| self.shape(x).1).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for &x in xs {
                let t = self.value(x);
                assert_eq!(t.rows, rows, "concat_cols row counts differ");
                data.extend_from_slice(t.row(i));
            }
        }
        let value = Tensor::from_vec(rows, cols, data);
        self.push(value, Op::ConcatCols(xs.to_vec()))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Var {
        let t = self.value(x);
        assert!(start + len <= t.cols, "slice_cols out of range");
        let mut data = Vec::with_capacity(t.rows * len);
        for i in 0..t.rows {
            data.extend_from_slice(&t.row(i)[start..start + len]);
        }
        let value = Tensor::from_vec(t.rows, len, data);
        self.push(value, Op::SliceCols { x, start })
    }

    /// Zero-pads `x` to `total` columns, placing it at column `left`.
    pub fn pad_cols(&mut self, x: Var, left: usize, total: usize) -> Var {
        let t = self.value(x);
        assert!(left + t.cols <= total, "pad_cols target too narrow");
        let mut value = Tensor::zeros(t.rows, total);
        for i in 0..t.rows {
            value.row_mut(i)[left..left + t.cols].copy_from_slice(t.row(i));
        }
        self.push(value, Op::PadCols { x, left })
    }

    /// Per-row normalization to zero mean and unit variance.
    pub fn layer_norm(&mut self, x: Var, eps: f64) -> Var {
        let c = self.shape(x).1;
        let mu = self.mean_cols(x);
        let mub = self.broadcast_cols(mu, c);
        let xc = self.sub(x, mub);
        let sq = self.mul(xc, xc);
        let var = self.mean_cols(sq);
        let var = self.add_scalar(var, eps);
        let sd = self.sqrt(var);
        let inv = self.recip(sd);
        let invb = self.broadcast_cols(inv, c);
        self.mul(xc, invb)
    }

    /// Mean negative log-likelihood of `labels` under row-wise softmax.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let (n, k) = self.shape(logits);
        if labels.len() != n {
            return Err(Error::ShapeMismatch {
                op: "cross_entropy",
                lhs: (labels.len(), 1),
                rhs: (n, k),
            });
        }
        let mut onehot = Tensor::zeros(n, k);
        for (i, &l) in labels.iter().enumerate() {
            if l >= k {
                return Err(Error::LabelOutOfRange { label: l, classes: k });
            }
            onehot.data[i * k + l] = 1.0;
        }
        let ls = self.log_softmax(logits);
        let oh = self.constant(onehot);
        let picked = self.mul(ls, oh);
        let s = self.sum_all(picked);
        Ok(self.scale(s, -1.0 / n as f64))
    }

    /// Inverted dropout: kept units are scaled by `1 / (1 - p)`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, p: f64, rng: &mut R) -> Var {
        if p <= 0.0 {
            return x;
        }
        let (r, c) = self.shape(x);
        let keep = 1.0 - p;
        let mask = (0..r * c)
            .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let m = self.constant(Tensor::from_vec(r, c, mask));
        self.mul(x, m)
    }

    fn ones_like(&mut self, v: Var) -> Var {
        let (r, c) = self.shape(v);
        self.constant(Tensor::full(r, c, 1.0))
    }

    /// Builds `d out / d wrt` as graph nodes. `out` must be scalar. Inputs
    /// that `out` does not depend on receive zero gradients.
    pub fn grad(&mut self, out: Var, wrt: &[Var]) -> Result<Vec<Var>> {
        let (r, c) = self.shape(out);
        if (r, c) != (1, 1) {
            return Err(Error::NotScalarLoss { rows: r, cols: c });
        }
        let n = out.0 + 1;
        let mut reach = vec![false; n];
        for &w in wrt {
            if w.0 < n {
                reach[w.0] = true;
            }
        }
        for i in 0..n {
            if !reach[i] && self.nodes[i].op.parents().iter().any(|p| reach[p.0]) {
                reach[i] = true;
            }
        }
        let mut grads: Vec<Option<Var>> = vec![None; n];
        if reach[out.0] {
            grads[out.0] = Some(self.ones_like(out));
        }
        for i in (0..n).rev() {
            let Some(g) = grads[i] else { continue };
            if !reach[i] {
                continue;
            }
            let op = self.nodes[i].op.clone();
            for (parent, contrib) in self.vjp(Var(i), &op, g, &reach)? {
                grads[parent.0] = Some(match grads[parent.0] {
                    Some(prev) => self.add(prev, contrib),
                    None => contrib,
                });
            }
        }
        Ok(wrt
            .iter()
            .map(|&w| match grads.get(w.0).copied().flatten() {
                Some(g) => g,
                None => {
                    let (r, c) = self.shape(w);
                    self.constant(Tensor::zeros(r, c))
                }
            })
            .collect())
    }

    /// Numeric gradients of a scalar `loss` with respect to `wrt`.
    pub fn backward(&mut self, loss: Var, wrt: &[Var]) -> Result<Vec<Tensor>> {
        let gs = self.grad(loss, wrt)?;
        Ok(gs.into_iter().map(|g| self.value(g).clone()).collect())
    }

    fn vjp(&mut self, node: Var, op: &Op, g: Var, reach: &[bool]) -> Result<Vec<(Var, Var)>> {
        let wants = |v: &Var| reach[v.0];
        let mut out = Vec::new();
        match *op {
            Op::Leaf | Op::Const => {}
            Op::MatMul { a, b, ta, tb } => {
                if wants(&a) {
                    let da = if ta {
                        self.matmul_t(b, g, tb, true)
                    } else {
                        self.matmul_t(g, b, false, !tb)
                    };
                    out.push((a, da));
                }
                if wants(&b) {
                    let db = if tb {
                        self.matmul_t(g, a, true, ta)
                    } else {
                        self.matmul_t(a, g, !ta, false)
                    };
                    out.push((b, db));
                }
            }
            Op::Add(a, b) => {
                if wants(&a) {
                    out.push((a, g));
                }
                if wants(&b) {
                    out.push((b, g));
                }
            }
            Op::Sub(a, b) => {
                if wants(&a) {
                    out.push((a, g));
                }
                if wants(&b) {
                    let nb = self.scale(g, -1.0);
                    out.push((b, nb));
                }
            }
            Op::Mul(a, b) => {
                if wants(&a) {
                    let da = self.mul(g, b);
                    out.push((a, da));
                }
                if wants(&b) {
                    let db = self.mul(g, a);
                    out.push((b, db));
                }
            }
            Op::Scale(x, k) => {
                let d = self.scale(g, k);
                out.push((x, d));
            }
            Op::AddScalar(x) => out.push((x, g)),
            Op::BroadcastRows(x) => {
                let d = self.sum_rows(g);
                out.push((x, d));
            }
            Op::BroadcastCols(x) => {
                let d = self.sum_cols(g);
                out.push((x, d));
            }
            Op::SumRows(x) => {
                let n = self.shape(x).0;
                let d = self.broadcast_rows(g, n);
                out.push((x, d));
            }
            Op::SumCols(x) => {
                let c = self.shape(x).1;
                let d = self.broadcast_cols(g, c);
                out.push((x, d));
            }
            Op::LeakyRelu(x, slope) => {
                let mask = self.value(x).map(|v| if v > 0.0 { 1.0 } else { slope });
                let m = self.constant(mask);
                let d = self.mul(g, m);
                out.push((x, d));
            }
            Op::Tanh(x) => {
                let y2 = self.mul(node, node);
                let neg = self.scale(y2, -1.0);
                let deriv = self.add_scalar(neg, 1.0);
                let d = self.mul(g, deriv);
                out.push((x, d));
            }
            Op::Sigmoid(x) => {
                let neg = self.scale(node, -1.0);
                let one_minus = self.add_scalar(neg, 1.0);
                let deriv = self.mul(node, one_minus);
                let d = self.mul(g, deriv);
                out.push((x, d));
            }
            Op::Exp(x) => {
                let d = self.mul(g, node);
                out.push((x, d));
            }
            Op::Log(x) => {
                let r = self.recip(x);
                let d = self.mul(g, r);
                out.push((x, d));
            }
            Op::Sqrt(x) => {
                let r = self.recip(node);
                let half = self.scale(r, 0.5);
                let d = self.mul(g, half);
                out.push((x, d));
            }
            Op::Recip(x) => {
                let y2 = self.mul(node, node);
                let gy2 = self.mul(g, y2);
                let d = self.scale(gy2, -1.0);
                out.push((x, d));
            }
            Op::ConcatCols(ref xs) => {
                let mut offset = 0;
                for x in xs.clone() {
                    let w = self.shape(x).1;
                    if wants(&x) {
                        let d = self.slice_cols(g, offset, w);
                        out.push((x, d));
                    }
                    offset += w;
                }
            }
            Op::SliceCols { x, start } => {
                let total = self.shape(x).1;
                let d = self.pad_cols(g, start, total);
                out.push((x, d));
            }
            Op::PadCols { x, left } => {
                let w = self.shape(x).1;
                let d = self.slice_cols(g, left, w);
                out.push((x, d));
            }
            Op::Softmax(x) => {
                let value = {
                    let y = self.value(node);
                    let gv = self.value(g);
                    let mut v = gv.clone();
                    for i in 0..v.rows {
                        let dot: f64 = gv.row(i).iter().zip(y.row(i)).map(|(a, b)| a * b).sum();
                        for (o, &yi) in v.row_mut(i).iter_mut().zip(y.row(i)) {
                            *o = yi * (*o - dot);
                        }
                    }
                    v
                };
                let d = self.push(value, Op::SoftmaxVjp { y: node, g });
                out.push((x, d));
            }
            Op::LogSoftmax(x) => {
                let value = {
                    let y = self.value(node);
                    let gv = self.value(g);
                    let mut v = gv.clone();
                    for i in 0..v.rows {
                        let s: f64 = gv.row(i).iter().sum();
                        for (o, &yi) in v.row_mut(i).iter_mut().zip(y.row(i)) {
                            *o -= yi.exp() * s;
                        }
                    }
                    v
                };
                let d = self.push(value, Op::LogSoftmaxVjp { y: node, g });
                out.push((x, d));
            }
            Op::Softplus(x) => {
                let value = self.value(x).zip(self.value(g), |xv, gv| gv * sigmoid(xv));
                let d = self.push(value, Op::SoftplusVjp { x, g });
                out.push((x, d));
            }
            Op::SoftmaxVjp { .. } => return Err(Error::UnsupportedOpForDoubleBackprop("softmax")),
            Op::LogSoftmaxVjp { .. } => {
                return Err(Error::UnsupportedOpForDoubleBackprop("log_softmax"))
            }
            Op::SoftplusVjp { .. } => return Err(Error::UnsupportedOpForDoubleBackprop("softplus")),
        }
        Ok(out)
    }
}
