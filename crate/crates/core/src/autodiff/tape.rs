use std::sync::Arc;

use crate::autodiff::tensor::{as_matrix, kernels};
use crate::autodiff::{SparseMatrix, Tensor};
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug)]
enum BinaryKind {
    Add,
    Sub,
    Mul,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul { a: Var, b: Var, transpose_b: bool },
    SpMM { s: Arc<SparseMatrix>, b: Var },
    Binary { kind: BinaryKind, a: Var, b: Var },
    Scale { x: Var, factor: f64 },
    Offset { x: Var },
    LeakyRelu { x: Var, slope: f64 },
    Concat { parts: Vec<Var> },
    Slice { x: Var, start: usize, end: usize },
    SumAll { x: Var },
    SumAxis { x: Var, axis: usize },
    Softmax { x: Var },
    Gather { x: Var, indices: Vec<usize> },
    BatchedMatVec { a: Var, x: Var, m: usize },
    Reshape { x: Var },
    SquaredNorm { x: Var },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records a dynamic computation graph in execution order. Every op's inputs
/// precede it, so reverse insertion order is a valid backward schedule.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`; zeros for constants and
    /// nodes the loss does not depend on.
    pub fn get(&self, v: Var) -> Tensor {
        let shape = self.shapes[v.0].clone();
        match &self.grads[v.0] {
            Some(g) => Tensor::new(shape, g.clone()).expect("gradient shape"),
            None => Tensor::zeros(&shape),
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A leaf that never receives gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    /// A trainable leaf.
    pub fn parameter(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn shape_error(&self, op: &'static str, a: Var, b: Var) -> Error {
        Error::Shape {
            op,
            left: self.shape(a).to_vec(),
            right: self.shape(b).to_vec(),
        }
    }

    fn matrix_dims(&self, op: &'static str, a: Var, b: Var) -> Result<((usize, usize), (usize, usize))> {
        let da = as_matrix(self.shape(a)).ok_or_else(|| self.shape_error(op, a, b))?;
        let db = as_matrix(self.shape(b)).ok_or_else(|| self.shape_error(op, a, b))?;
        Ok((da, db))
    }

    /// `a[m×n] · b[n×p]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let ((m, n), (n2, p)) = self.matrix_dims("matmul", a, b)?;
        if n != n2 {
            return Err(self.shape_error("matmul", a, b));
        }
        let mut out = vec![0.0; m * p];
        kernels::matmul_nn(self.value(a).data(), self.value(b).data(), m, n, p, &mut out);
        let value = Tensor::new(vec![m, p], out)?;
        Ok(self.push(value, Op::MatMul { a, b, transpose_b: false }, &[a, b]))
    }

    /// `a[m×n] · b[p×n]ᵀ`, the usual form for applying a weight stored as out×in.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let ((m, n), (p, n2)) = self.matrix_dims("matmul_nt", a, b)?;
        if n != n2 {
            return Err(self.shape_error("matmul_nt", a, b));
        }
        let mut out = vec![0.0; m * p];
        kernels::matmul_nt(self.value(a).data(), self.value(b).data(), m, n, p, &mut out);
        let value = Tensor::new(vec![m, p], out)?;
        Ok(self.push(value, Op::MatMul { a, b, transpose_b: true }, &[a, b]))
    }

    /// Sparse × dense product. The sparse operand is structure and gets no gradient.
    pub fn spmm(&mut self, s: &Arc<SparseMatrix>, b: Var) -> Result<Var> {
        let (n, p) = as_matrix(self.shape(b)).ok_or_else(|| Error::Shape {
            op: "spmm",
            left: vec![s.rows(), s.cols()],
            right: self.shape(b).to_vec(),
        })?;
        if n != s.cols() {
            return Err(Error::Shape {
                op: "spmm",
                left: vec![s.rows(), s.cols()],
                right: self.shape(b).to_vec(),
            });
        }
        let mut out = vec![0.0; s.rows() * p];
        s.mul_dense_acc(self.value(b).data(), p, &mut out);
        let value = Tensor::new(vec![s.rows(), p], out)?;
        Ok(self.push(value, Op::SpMM { s: Arc::clone(s), b }, &[b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Sub, a, b)
    }

    /// Element-wise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Mul, a, b)
    }

    fn binary(&mut self, kind: BinaryKind, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let value = if sa == sb {
            let (va, vb) = (self.value(a).data(), self.value(b).data());
            let data = va.iter().zip(vb).map(|(&x, &y)| apply(kind, x, y)).collect();
            Tensor::new(sa.to_vec(), data)?
        } else {
            let out_shape = broadcast_shape(sa, sb).ok_or_else(|| self.shape_error("broadcast", a, b))?;
            let (ia, ib) = broadcast_indices(&out_shape, sa, sb);
            let (va, vb) = (self.value(a).data(), self.value(b).data());
            let data = ia.iter().zip(&ib).map(|(&i, &j)| apply(kind, va[i], vb[j])).collect();
            Tensor::new(out_shape, data)?
        };
        Ok(self.push(value, Op::Binary { kind, a, b }, &[a, b]))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let data = self.value(x).data().iter().map(|v| v * factor).collect();
        let value = Tensor::new(self.shape(x).to_vec(), data).expect("same shape");
        self.push(value, Op::Scale { x, factor }, &[x])
    }

    /// Adds a constant to every element.
    pub fn offset(&mut self, x: Var, c: f64) -> Var {
        let data = self.value(x).data().iter().map(|v| v + c).collect();
        let value = Tensor::new(self.shape(x).to_vec(), data).expect("same shape");
        self.push(value, Op::Offset { x }, &[x])
    }

    /// `x` where positive, `slope * x` elsewhere. `slope = 0` is a ReLU.
    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let data = self
            .value(x)
            .data()
            .iter()
            .map(|&v| if v > 0.0 { v } else { slope * v })
            .collect();
        let value = Tensor::new(self.shape(x).to_vec(), data).expect("same shape");
        self.push(value, Op::LeakyRelu { x, slope }, &[x])
    }

    /// Concatenation along the last axis; leading axes must agree.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(Error::EmptyAxis { op: "concat" })?;
        let lead = &self.shape(first)[..self.shape(first).len().saturating_sub(1)];
        let rows = self.value(first).rows();
        let mut width = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.is_empty() || &s[..s.len() - 1] != lead {
                return Err(self.shape_error("concat", first, p));
            }
            width += self.value(p).cols();
        }
        let mut data = Vec::with_capacity(rows * width);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let mut shape = lead.to_vec();
        shape.push(width);
        let value = Tensor::new(shape, data)?;
        Ok(self.push(value, Op::Concat { parts: parts.to_vec() }, parts))
    }

    /// Columns `[start, end)` of the last axis.
    pub fn slice(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let t = self.value(x);
        let len = t.cols();
        if t.shape().is_empty() || start >= end || end > len {
            return Err(Error::SliceOutOfRange { start, end, len });
        }
        let mut data = Vec::with_capacity(t.rows() * (end - start));
        for r in 0..t.rows() {
            data.extend_from_slice(&t.row(r)[start..end]);
        }
        let mut shape = t.shape().to_vec();
        *shape.last_mut().unwrap() = end - start;
        let value = Tensor::new(shape, data)?;
        Ok(self.push(value, Op::Slice { x, start, end }, &[x]))
    }

    /// Sum of all elements as a scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let total = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(total), Op::SumAll { x }, &[x])
    }

    /// Sum along `axis`, keeping it with size 1.
    pub fn sum_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::Shape {
                op: "sum_axis",
                left: shape,
                right: vec![axis],
            });
        }
        let (outer, len, inner) = split_axis(&shape, axis);
        let src = self.value(x).data();
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for k in 0..len {
                let base = (o * len + k) * inner;
                for i in 0..inner {
                    out[o * inner + i] += src[base + i];
                }
            }
        }
        let mut out_shape = shape;
        out_shape[axis] = 1;
        let value = Tensor::new(out_shape, out)?;
        Ok(self.push(value, Op::SumAxis { x, axis }, &[x]))
    }

    /// Row-wise dot product of two `[n, d]` tensors, giving `[n, 1]`.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let prod = self.mul(a, b)?;
        let last = self.shape(prod).len().saturating_sub(1);
        self.sum_axis(prod, last)
    }

    /// Max-subtracted softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        if t.shape().is_empty() || t.cols() == 0 {
            return Err(Error::EmptyAxis { op: "softmax" });
        }
        let c = t.cols();
        let mut data = t.data().to_vec();
        for row in data.chunks_mut(c) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        let value = Tensor::new(t.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Softmax { x }, &[x]))
    }

    /// Selects rows (first axis) of `x`; repeated indices are allowed.
    pub fn gather_rows(&mut self, x: Var, indices: &[usize]) -> Result<Var> {
        let t = self.value(x);
        let shape = t.shape();
        let n = *shape.first().ok_or_else(|| Error::Shape {
            op: "gather_rows",
            left: vec![],
            right: vec![indices.len()],
        })?;
        let width = t.len() / n.max(1);
        let mut data = Vec::with_capacity(indices.len() * width);
        for &i in indices {
            if i >= n {
                return Err(Error::Shape {
                    op: "gather_rows",
                    left: shape.to_vec(),
                    right: vec![i],
                });
            }
            data.extend_from_slice(&t.data()[i * width..(i + 1) * width]);
        }
        let mut out_shape = shape.to_vec();
        out_shape[0] = indices.len();
        let value = Tensor::new(out_shape, data)?;
        Ok(self.push(
            value,
            Op::Gather {
                x,
                indices: indices.to_vec(),
            },
            &[x],
        ))
    }

    /// Per-row matrix-vector product: row `r` of `a` is a row-major `m×n`
    /// matrix applied to row `r` of `x`. Shapes `[N, m·n]`, `[N, n]` → `[N, m]`.
    pub fn batched_matvec(&mut self, a: Var, x: Var, m: usize) -> Result<Var> {
        let ((rows, flat), (rows2, n)) = self.matrix_dims("batched_matvec", a, x)?;
        if rows != rows2 || m * n != flat {
            return Err(self.shape_error("batched_matvec", a, x));
        }
        let (va, vx) = (self.value(a).data(), self.value(x).data());
        let mut out = vec![0.0; rows * m];
        for r in 0..rows {
            let xr = &vx[r * n..(r + 1) * n];
            for i in 0..m {
                let ar = &va[r * flat + i * n..r * flat + (i + 1) * n];
                out[r * m + i] = ar.iter().zip(xr).map(|(p, q)| p * q).sum();
            }
        }
        let value = Tensor::new(vec![rows, m], out)?;
        Ok(self.push(value, Op::BatchedMatVec { a, x, m }, &[a, x]))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).clone().reshaped(shape.to_vec())?;
        Ok(self.push(value, Op::Reshape { x }, &[x]))
    }

    /// Squared Frobenius norm as a scalar.
    pub fn squared_norm(&mut self, x: Var) -> Var {
        let total = self.value(x).sum_squares();
        self.push(Tensor::scalar(total), Op::SquaredNorm { x }, &[x])
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let loss_value = self.value(loss);
        if loss_value.len() != 1 {
            return Err(Error::NonScalarLoss(loss_value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[id] = Some(g);
        }

        for (id, node) in self.nodes.iter().enumerate() {
            if !node.requires_grad {
                grads[id] = None;
            }
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b, transpose_b } => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let (m, n) = as_matrix(va.shape()).unwrap();
                if *transpose_b {
                    // out = a·bᵀ with b: p×n
                    let p = vb.shape()[0];
                    if self.wants(*a) {
                        kernels::matmul_nn(g, vb.data(), m, p, n, slot(grads, *a, va.len()));
                    }
                    if self.wants(*b) {
                        kernels::matmul_tn(g, va.data(), m, p, n, slot(grads, *b, vb.len()));
                    }
                } else {
                    let p = vb.shape()[1];
                    if self.wants(*a) {
                        kernels::matmul_nt(g, vb.data(), m, p, n, slot(grads, *a, va.len()));
                    }
                    if self.wants(*b) {
                        kernels::matmul_tn(va.data(), g, m, n, p, slot(grads, *b, vb.len()));
                    }
                }
            }
            Op::SpMM { s, b } => {
                if self.wants(*b) {
                    let vb = self.value(*b);
                    s.transpose_mul_dense_acc(g, vb.cols(), slot(grads, *b, vb.len()));
                }
            }
            Op::Binary { kind, a, b } => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let same = va.shape() == vb.shape();
                let (ia, ib) = if same {
                    (Vec::new(), Vec::new())
                } else {
                    broadcast_indices(node.value.shape(), va.shape(), vb.shape())
                };
                let index_a = |o: usize| if same { o } else { ia[o] };
                let index_b = |o: usize| if same { o } else { ib[o] };
                if self.wants(*a) {
                    let ga = slot(grads, *a, va.len());
                    for (o, &go) in g.iter().enumerate() {
                        ga[index_a(o)] += match kind {
                            BinaryKind::Add | BinaryKind::Sub => go,
                            BinaryKind::Mul => go * vb.data()[index_b(o)],
                        };
                    }
                }
                if self.wants(*b) {
                    let gb = slot(grads, *b, vb.len());
                    for (o, &go) in g.iter().enumerate() {
                        gb[index_b(o)] += match kind {
                            BinaryKind::Add => go,
                            BinaryKind::Sub => -go,
                            BinaryKind::Mul => go * va.data()[index_a(o)],
                        };
                    }
                }
            }
            Op::Scale { x, factor } => {
                let gx = slot(grads, *x, g.len());
                for (d, &go) in gx.iter_mut().zip(g) {
                    *d += go * factor;
                }
            }
            Op::Offset { x } | Op::Reshape { x } => {
                let gx = slot(grads, *x, g.len());
                for (d, &go) in gx.iter_mut().zip(g) {
                    *d += go;
                }
            }
            Op::LeakyRelu { x, slope } => {
                let vx = self.value(*x).data();
                let gx = slot(grads, *x, g.len());
                for ((d, &go), &v) in gx.iter_mut().zip(g).zip(vx) {
                    *d += if v > 0.0 { go } else { go * slope };
                }
            }
            Op::Concat { parts } => {
                let width = node.value.cols();
                let mut offset = 0;
                for &p in parts {
                    let vp = self.value(p);
                    let w = vp.cols();
                    if self.wants(p) {
                        let gp = slot(grads, p, vp.len());
                        for r in 0..vp.rows() {
                            let src = &g[r * width + offset..r * width + offset + w];
                            for (d, &go) in gp[r * w..(r + 1) * w].iter_mut().zip(src) {
                                *d += go;
                            }
                        }
                    }
                    offset += w;
                }
            }
            Op::Slice { x, start, end } => {
                let vx = self.value(*x);
                let (c, w) = (vx.cols(), end - start);
                let gx = slot(grads, *x, vx.len());
                for r in 0..vx.rows() {
                    for (d, &go) in gx[r * c + start..r * c + end].iter_mut().zip(&g[r * w..(r + 1) * w]) {
                        *d += go;
                    }
                }
            }
            Op::SumAll { x } => {
                let gx = slot(grads, *x, self.value(*x).len());
                for d in gx.iter_mut() {
                    *d += g[0];
                }
            }
            Op::SumAxis { x, axis } => {
                let vx = self.value(*x);
                let (outer, len, inner) = split_axis(vx.shape(), *axis);
                let gx = slot(grads, *x, vx.len());
                for o in 0..outer {
                    for k in 0..len {
                        let base = (o * len + k) * inner;
                        for i in 0..inner {
                            gx[base + i] += g[o * inner + i];
                        }
                    }
                }
            }
            Op::Softmax { x } => {
                let y = node.value.data();
                let c = node.value.cols();
                let gx = slot(grads, *x, y.len());
                for ((yr, gr), dr) in y.chunks(c).zip(g.chunks(c)).zip(gx.chunks_mut(c)) {
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for ((d, &yi), &gi) in dr.iter_mut().zip(yr).zip(gr) {
                        *d += yi * (gi - dot);
                    }
                }
            }
            Op::Gather { x, indices } => {
                let vx = self.value(*x);
                let width = vx.len() / vx.shape()[0].max(1);
                let gx = slot(grads, *x, vx.len());
                for (r, &i) in indices.iter().enumerate() {
                    for (d, &go) in gx[i * width..(i + 1) * width].iter_mut().zip(&g[r * width..(r + 1) * width]) {
                        *d += go;
                    }
                }
            }
            Op::BatchedMatVec { a, x, m } => {
                let (va, vx) = (self.value(*a), self.value(*x));
                let (rows, n) = (vx.rows(), vx.cols());
                let flat = m * n;
                if self.wants(*a) {
                    let ga = slot(grads, *a, va.len());
                    for r in 0..rows {
                        let xr = &vx.data()[r * n..(r + 1) * n];
                        for i in 0..*m {
                            let go = g[r * m + i];
                            for (d, &xv) in ga[r * flat + i * n..r * flat + (i + 1) * n].iter_mut().zip(xr) {
                                *d += go * xv;
                            }
                        }
                    }
                }
                if self.wants(*x) {
                    let gx = slot(grads, *x, vx.len());
                    for r in 0..rows {
                        for i in 0..*m {
                            let go = g[r * m + i];
                            let ar = &va.data()[r * flat + i * n..r * flat + (i + 1) * n];
                            for (d, &av) in gx[r * n..(r + 1) * n].iter_mut().zip(ar) {
                                *d += go * av;
                            }
                        }
                    }
                }
            }
            Op::SquaredNorm { x } => {
                let vx = self.value(*x).data();
                let gx = slot(grads, *x, vx.len());
                for (d, &v) in gx.iter_mut().zip(vx) {
                    *d += 2.0 * v * g[0];
                }
            }
        }
    }
}

fn apply(kind: BinaryKind, x: f64, y: f64) -> f64 {
    match kind {
        BinaryKind::Add => x + y,
        BinaryKind::Sub => x - y,
        BinaryKind::Mul => x * y,
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut [f64] {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}

fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

/// Numpy-style broadcast of two shapes, aligned from the right.
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i < rank - a.len() { 1 } else { a[i - (rank - a.len())] };
        let db = if i < rank - b.len() { 1 } else { b[i - (rank - b.len())] };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// Flat source index in `a` and `b` for every element of the broadcast output.
fn broadcast_indices(out: &[usize], a: &[usize], b: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let strides = |s: &[usize]| -> Vec<usize> {
        let pad = out.len() - s.len();
        let mut st = vec![0; out.len()];
        let mut acc = 1;
        for i in (0..s.len()).rev() {
            st[i + pad] = if s[i] == 1 { 0 } else { acc };
            acc *= s[i];
        }
        st
    };
    let (sa, sb) = (strides(a), strides(b));
    let total: usize = out.iter().product();
    let mut ia = Vec::with_capacity(total);
    let mut ib = Vec::with_capacity(total);
    let mut idx = vec![0; out.len()];
    let (mut pa, mut pb) = (0usize, 0usize);
    for _ in 0..total {
        ia.push(pa);
        ib.push(pb);
        for axis in (0..out.len()).rev() {
            idx[axis] += 1;
            pa += sa[axis];
            pb += sb[axis];
            if idx[axis] < out[axis] {
                break;
            }
            pa -= sa[axis] * out[axis];
            pb -= sb[axis] * out[axis];
            idx[axis] = 0;
        }
    }
    (ia, ib)
}
