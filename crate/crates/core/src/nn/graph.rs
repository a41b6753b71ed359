//! Tape-based reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! A [`Graph`] records every primitive applied during a forward pass in
//! creation order, which is already a topological order. [`Graph::backward`]
//! walks the record once in reverse and accumulates gradients into every
//! leaf that requires them.

use std::rc::Rc;

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

/// Handle to a value recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Sigmoid,
    Tanh,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Binary(BinaryOp, Var, Var),
    AddRow(Var, Var),
    MulBroadcast(Var, Var),
    Unary(UnaryOp, Var),
    Scale(Var, f64),
    Mask(Var, Rc<Vec<f64>>),
    SliceCols { src: Var, start: usize },
    ConcatCols(Vec<Var>),
    Sum(Var),
    Rmse(Var, Var),
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::MatMul(a, b)
            | Op::Binary(_, a, b)
            | Op::AddRow(a, b)
            | Op::MulBroadcast(a, b)
            | Op::Rmse(a, b) => vec![*a, *b],
            Op::Unary(_, a) | Op::Scale(a, _) | Op::Mask(a, _) | Op::Sum(a) => vec![*a],
            Op::SliceCols { src, .. } => vec![*src],
            Op::ConcatCols(parts) => parts.clone(),
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    /// Accumulated gradient, kept for leaves only.
    grad: Option<Vec<f64>>,
}

/// Record of a computation, replayable once per [`Graph::backward`] call.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
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

    /// Records a leaf. Gradients are tracked iff `tensor.requires_grad()`.
    pub fn leaf(&mut self, tensor: Tensor) -> Var {
        let requires_grad = tensor.requires_grad();
        self.push(tensor, Op::Leaf, requires_grad)
    }

    /// Records a leaf that never receives a gradient.
    pub fn constant(&mut self, tensor: Tensor) -> Var {
        self.push(tensor.with_requires_grad(false), Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Gradient accumulated on a leaf by previous `backward` calls.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].grad.as_deref()
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    /// Input ids of each recorded node, in record order.
    pub fn record(&self) -> Vec<Vec<usize>> {
        self.nodes
            .iter()
            .map(|n| n.op.inputs().into_iter().map(Var::index).collect())
            .collect()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if tb.shape().len() != 2 || ta.shape().len() > 2 || ta.cols() != tb.shape()[0] {
            return Err(Error::dim("matmul", ta.shape(), tb.shape()));
        }
        let (r, k, c) = (ta.rows(), ta.cols(), tb.cols());
        let mut out = vec![0.0; r * c];
        kernels::matmul(ta.data(), tb.data(), &mut out, r, k, c);
        let shape = if ta.shape().len() == 1 { vec![c] } else { vec![r, c] };
        let rg = self.needs(&[a, b]);
        Ok(self.push(Tensor::from_parts(shape, out), Op::MatMul(a, b), rg))
    }

    pub fn binary(&mut self, op: BinaryOp, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::dim("elementwise", ta.shape(), tb.shape()));
        }
        let f: fn(f64, f64) -> f64 = match op {
            BinaryOp::Add => |x, y| x + y,
            BinaryOp::Sub => |x, y| x - y,
            BinaryOp::Mul => |x, y| x * y,
        };
        let out = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let shape = ta.shape().to_vec();
        let rg = self.needs(&[a, b]);
        Ok(self.push(Tensor::from_parts(shape, out), Op::Binary(op, a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Mul, a, b)
    }

    pub fn unary(&mut self, op: UnaryOp, a: Var) -> Var {
        let ta = self.value(a);
        let out = ta
            .data()
            .iter()
            .map(|&x| match op {
                UnaryOp::Sigmoid => sigmoid(x),
                UnaryOp::Tanh => x.tanh(),
                UnaryOp::Relu => x.max(0.0),
            })
            .collect();
        let shape = ta.shape().to_vec();
        let rg = self.needs(&[a]);
        self.push(Tensor::from_parts(shape, out), Op::Unary(op, a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(UnaryOp::Sigmoid, a)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(UnaryOp::Tanh, a)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(UnaryOp::Relu, a)
    }

    /// `a[r×c] + bias[c]`, bias repeated over rows.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(bias));
        if tb.len() != ta.cols() {
            return Err(Error::dim("add_row", ta.shape(), tb.shape()));
        }
        let c = ta.cols();
        let mut out = ta.data().to_vec();
        for row in out.chunks_mut(c) {
            row.iter_mut().zip(tb.data()).for_each(|(o, b)| *o += b);
        }
        let shape = ta.shape().to_vec();
        let rg = self.needs(&[a, bias]);
        Ok(self.push(Tensor::from_parts(shape, out), Op::AddRow(a, bias), rg))
    }

    /// `a[r×c] * w`, where `w` holds one value or one value per column.
    pub fn mul_broadcast(&mut self, a: Var, w: Var) -> Result<Var> {
        let (ta, tw) = (self.value(a), self.value(w));
        let c = ta.cols();
        if tw.len() != 1 && tw.len() != c {
            return Err(Error::dim("mul_broadcast", ta.shape(), tw.shape()));
        }
        let wd = tw.data();
        let out = ta
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| x * if wd.len() == 1 { wd[0] } else { wd[i % c] })
            .collect();
        let shape = ta.shape().to_vec();
        let rg = self.needs(&[a, w]);
        Ok(self.push(Tensor::from_parts(shape, out), Op::MulBroadcast(a, w), rg))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let ta = self.value(a);
        let out = ta.data().iter().map(|x| x * k).collect();
        let shape = ta.shape().to_vec();
        let rg = self.needs(&[a]);
        self.push(Tensor::from_parts(shape, out), Op::Scale(a, k), rg)
    }

    /// Multiplies by a constant same-shape mask (dropout).
    pub fn mask(&mut self, a: Var, mask: Vec<f64>) -> Result<Var> {
        let ta = self.value(a);
        if mask.len() != ta.len() {
            return Err(Error::dim("mask", ta.shape(), &[mask.len()]));
        }
        let out = ta.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        let shape = ta.shape().to_vec();
        let rg = self.needs(&[a]);
        Ok(self.push(Tensor::from_parts(shape, out), Op::Mask(a, Rc::new(mask)), rg))
    }

    /// Columns `start..start + len` of a matrix.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let ta = self.value(a);
        let c = ta.cols();
        if len == 0 || start + len > c {
            return Err(Error::dim("slice_cols", ta.shape(), &[start, len]));
        }
        let mut out = Vec::with_capacity(ta.rows() * len);
        for row in ta.data().chunks(c) {
            out.extend_from_slice(&row[start..start + len]);
        }
        let mut shape = ta.shape().to_vec();
        *shape.last_mut().unwrap() = len;
        let rg = self.needs(&[a]);
        Ok(self.push(Tensor::from_parts(shape, out), Op::SliceCols { src: a, start }, rg))
    }

    /// Concatenates matrices with equal row counts along columns.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::Domain("concat of zero tensors".into()));
        };
        let rows = self.value(first).rows();
        let two_d = self.value(first).shape().len() == 2;
        for &p in parts {
            if self.value(p).rows() != rows {
                return Err(Error::dim("concat_cols", self.shape(first), self.shape(p)));
            }
        }
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                let t = self.value(p);
                let c = t.cols();
                out.extend_from_slice(&t.data()[r * c..(r + 1) * c]);
            }
        }
        let shape = if two_d { vec![rows, total] } else { vec![total] };
        let rg = self.needs(parts);
        Ok(self.push(
            Tensor::from_parts(shape, out),
            Op::ConcatCols(parts.to_vec()),
            rg,
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let rg = self.needs(&[a]);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    /// `sqrt(mean((pred - target)^2))` as a scalar.
    pub fn rmse(&mut self, pred: Var, target: Var) -> Result<Var> {
        let (tp, tt) = (self.value(pred), self.value(target));
        if tp.shape() != tt.shape() {
            return Err(Error::dim("rmse", tp.shape(), tt.shape()));
        }
        let r = kernels::rmse(tp.data(), tt.data());
        let rg = self.needs(&[pred, target]);
        Ok(self.push(Tensor::scalar(r), Op::Rmse(pred, target), rg))
    }

    /// Accumulates `d loss / d leaf` into every gradient-tracking leaf.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            let op = self.nodes[i].op.clone();
            match op {
                Op::Leaf => {
                    let node = &mut self.nodes[i];
                    match &mut node.grad {
                        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, d)| *a += d),
                        None => node.grad = Some(g),
                    }
                }
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(a), self.value(b));
                    let (r, k, c) = (ta.rows(), ta.cols(), tb.cols());
                    if self.nodes[a.0].requires_grad {
                        let mut da = vec![0.0; r * k];
                        kernels::matmul_bt(&g, tb.data(), &mut da, r, c, k);
                        accumulate(&mut adj, a, da);
                    }
                    if self.nodes[b.0].requires_grad {
                        let mut db = vec![0.0; k * c];
                        kernels::matmul_at(ta.data(), &g, &mut db, r, k, c);
                        accumulate(&mut adj, b, db);
                    }
                }
                Op::Binary(kind, a, b) => {
                    let (ra, rb) = (self.nodes[a.0].requires_grad, self.nodes[b.0].requires_grad);
                    match kind {
                        BinaryOp::Add => {
                            if ra {
                                accumulate(&mut adj, a, g.clone());
                            }
                            if rb {
                                accumulate(&mut adj, b, g);
                            }
                        }
                        BinaryOp::Sub => {
                            if ra {
                                accumulate(&mut adj, a, g.clone());
                            }
                            if rb {
                                accumulate(&mut adj, b, g.iter().map(|x| -x).collect());
                            }
                        }
                        BinaryOp::Mul => {
                            if ra {
                                let vb = self.value(b).data();
                                accumulate(&mut adj, a, g.iter().zip(vb).map(|(g, y)| g * y).collect());
                            }
                            if rb {
                                let va = self.value(a).data();
                                accumulate(&mut adj, b, g.iter().zip(va).map(|(g, x)| g * x).collect());
                            }
                        }
                    }
                }
                Op::AddRow(a, bias) => {
                    if self.nodes[bias.0].requires_grad {
                        let c = self.value(bias).len();
                        let mut db = vec![0.0; c];
                        for row in g.chunks(c) {
                            db.iter_mut().zip(row).for_each(|(d, x)| *d += x);
                        }
                        accumulate(&mut adj, bias, db);
                    }
                    if self.nodes[a.0].requires_grad {
                        accumulate(&mut adj, a, g);
                    }
                }
                Op::MulBroadcast(a, w) => {
                    let (ta, tw) = (self.value(a), self.value(w));
                    let c = ta.cols();
                    let wd = tw.data();
                    let wat = |i: usize| if wd.len() == 1 { wd[0] } else { wd[i % c] };
                    if self.nodes[w.0].requires_grad {
                        let mut dw = vec![0.0; wd.len()];
                        for (i, (gi, xi)) in g.iter().zip(ta.data()).enumerate() {
                            dw[if wd.len() == 1 { 0 } else { i % c }] += gi * xi;
                        }
                        accumulate(&mut adj, w, dw);
                    }
                    if self.nodes[a.0].requires_grad {
                        let da = g.iter().enumerate().map(|(i, gi)| gi * wat(i)).collect();
                        accumulate(&mut adj, a, da);
                    }
                }
                Op::Unary(kind, a) => {
                    let y = self.nodes[i].value.data();
                    let da = match kind {
                        UnaryOp::Sigmoid => g.iter().zip(y).map(|(g, y)| g * y * (1.0 - y)).collect(),
                        UnaryOp::Tanh => g.iter().zip(y).map(|(g, y)| g * (1.0 - y * y)).collect(),
                        UnaryOp::Relu => {
                            let x = self.value(a).data();
                            g.iter()
                                .zip(x)
                                .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                                .collect()
                        }
                    };
                    accumulate(&mut adj, a, da);
                }
                Op::Scale(a, k) => accumulate(&mut adj, a, g.iter().map(|x| x * k).collect()),
                Op::Mask(a, m) => {
                    accumulate(&mut adj, a, g.iter().zip(m.iter()).map(|(g, m)| g * m).collect())
                }
                Op::SliceCols { src, start } => {
                    let ts = self.value(src);
                    let (rows, c) = (ts.rows(), ts.cols());
                    let len = self.nodes[i].value.cols();
                    let mut ds = vec![0.0; rows * c];
                    for r in 0..rows {
                        ds[r * c + start..r * c + start + len]
                            .copy_from_slice(&g[r * len..(r + 1) * len]);
                    }
                    accumulate(&mut adj, src, ds);
                }
                Op::ConcatCols(parts) => {
                    let rows = self.nodes[i].value.rows();
                    let total = self.nodes[i].value.cols();
                    let mut offset = 0;
                    for p in parts {
                        let c = self.value(p).cols();
                        if self.nodes[p.0].requires_grad {
                            let mut dp = Vec::with_capacity(rows * c);
                            for r in 0..rows {
                                dp.extend_from_slice(&g[r * total + offset..r * total + offset + c]);
                            }
                            accumulate(&mut adj, p, dp);
                        }
                        offset += c;
                    }
                }
                Op::Sum(a) => {
                    let n = self.value(a).len();
                    accumulate(&mut adj, a, vec![g[0]; n]);
                }
                Op::Rmse(pred, target) => {
                    let r = self.nodes[i].value.data()[0];
                    let (tp, tt) = (self.value(pred).data(), self.value(target).data());
                    let n = tp.len() as f64;
                    let dp: Vec<f64> = if r == 0.0 {
                        vec![0.0; tp.len()]
                    } else {
                        tp.iter().zip(tt).map(|(p, t)| g[0] * (p - t) / (n * r)).collect()
                    };
                    if self.nodes[target.0].requires_grad {
                        accumulate(&mut adj, target, dp.iter().map(|x| -x).collect());
                    }
                    if self.nodes[pred.0].requires_grad {
                        accumulate(&mut adj, pred, dp);
                    }
                }
            }
        }
        Ok(())
    }
}

fn accumulate(adj: &mut [Option<Vec<f64>>], v: Var, delta: Vec<f64>) {
    match &mut adj[v.0] {
        Some(acc) => acc.iter_mut().zip(&delta).for_each(|(a, d)| *a += d),
        slot @ None => *slot = Some(delta),
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Raw loops shared by the graph and the inference paths.
pub mod kernels {
    /// `out[r×c] = a[r×k] · b[k×c]`, overwriting `out`.
    pub fn matmul(a: &[f64], b: &[f64], out: &mut [f64], r: usize, k: usize, c: usize) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for i in 0..r {
            let orow = &mut out[i * c..(i + 1) * c];
            for p in 0..k {
                let aip = a[i * k + p];
                if aip == 0.0 {
                    continue;
                }
                let brow = &b[p * c..(p + 1) * c];
                orow.iter_mut().zip(brow).for_each(|(o, &bv)| *o += aip * bv);
            }
        }
    }

    /// `out[r×k] += g[r×c] · b[k×c]^T`
    pub fn matmul_bt(g: &[f64], b: &[f64], out: &mut [f64], r: usize, c: usize, k: usize) {
        for i in 0..r {
            let grow = &g[i * c..(i + 1) * c];
            for p in 0..k {
                let brow = &b[p * c..(p + 1) * c];
                out[i * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
            }
        }
    }

    /// `out[k×c] += a[r×k]^T · g[r×c]`
    pub fn matmul_at(a: &[f64], g: &[f64], out: &mut [f64], r: usize, k: usize, c: usize) {
        for i in 0..r {
            let grow = &g[i * c..(i + 1) * c];
            for p in 0..k {
                let aip = a[i * k + p];
                if aip == 0.0 {
                    continue;
                }
                out[p * c..(p + 1) * c]
                    .iter_mut()
                    .zip(grow)
                    .for_each(|(o, &gv)| *o += aip * gv);
            }
        }
    }

    pub fn rmse(pred: &[f64], target: &[f64]) -> f64 {
        let n = pred.len() as f64;
        let ss: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
        (ss / n).sqrt()
    }
}
