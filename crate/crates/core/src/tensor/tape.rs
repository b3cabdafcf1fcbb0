//! Tape-based reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! A [`Tape`] is built fresh for every forward pass. Parameters are borrowed
//! (never copied) for the lifetime of the tape; intermediate values are owned
//! by it. Calling [`Tape::backward`] on a scalar walks the recorded operations
//! in reverse and leaves a gradient on every node that requires one and that
//! the loss depends on.

use std::borrow::Cow;
use std::collections::HashMap;

use super::array::Tensor;
use super::kernels;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    BatchMatMul(Var, Var),
    TransposeLast2(Var),
    Reshape(Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Conv1d {
        input: Var,
        kernels: Var,
        bias: Var,
    },
    MaxPool1d {
        input: Var,
        argmax: Vec<usize>,
    },
    Softmax(Var),
    MeanTokens(Var),
    Concat(Vec<Var>),
    Sum(Var),
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
}

struct Node<'a> {
    value: Cow<'a, Tensor>,
    op: Op,
    requires_grad: bool,
    grad: Option<Tensor>,
}

#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
    params: HashMap<*const Tensor, Var>,
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Registers a trainable parameter. Registering the same tensor twice
    /// returns the same handle, so shared weights accumulate one gradient.
    pub fn param(&mut self, tensor: &'a Tensor) -> Var {
        let key = tensor as *const Tensor;
        if let Some(&var) = self.params.get(&key) {
            return var;
        }
        let var = self.push(Cow::Borrowed(tensor), Op::Leaf, true);
        self.params.insert(key, var);
        var
    }

    pub fn leaf(&mut self, tensor: Tensor, requires_grad: bool) -> Var {
        self.push(Cow::Owned(tensor), Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, tensor: Tensor) -> Var {
        self.leaf(tensor, false)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    pub fn grad(&self, var: Var) -> Option<&Tensor> {
        self.nodes[var.0].grad.as_ref()
    }

    /// Gradient of a tensor previously registered with [`Tape::param`].
    pub fn param_grad(&self, tensor: &Tensor) -> Option<&Tensor> {
        self.params
            .get(&(tensor as *const Tensor))
            .and_then(|&v| self.grad(v))
    }

    fn push(&mut self, value: Cow<'a, Tensor>, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn record(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.push(Cow::Owned(value), op, requires_grad)
    }

    /// `[m×k] · [k×n] → [m×n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        kernels::gemm(self.value(a).data(), self.value(b).data(), m, k, n, &mut out);
        let value = Tensor::new(vec![m, n], out)?;
        Ok(self.record(value, Op::MatMul(a, b), &[a, b]))
    }

    /// Batched product `[B×m×k] · [B×k×n] → [B×m×n]`.
    pub fn bmm(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 3 || sb.len() != 3 || sa[0] != sb[0] || sa[2] != sb[1] {
            return Err(Error::ShapeMismatch {
                op: "bmm",
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        let (batch, m, k, n) = (sa[0], sa[1], sa[2], sb[2]);
        let mut out = vec![0.0; batch * m * n];
        let (da, db) = (self.value(a).data(), self.value(b).data());
        for i in 0..batch {
            kernels::gemm(
                &da[i * m * k..(i + 1) * m * k],
                &db[i * k * n..(i + 1) * k * n],
                m,
                k,
                n,
                &mut out[i * m * n..(i + 1) * m * n],
            );
        }
        let value = Tensor::new(vec![batch, m, n], out)?;
        Ok(self.record(value, Op::BatchMatMul(a, b), &[a, b]))
    }

    /// Swaps the last two axes of a rank-2 or rank-3 tensor.
    pub fn transpose_last2(&mut self, a: Var) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        let r = shape.len();
        if r < 2 {
            return Err(Error::InvalidShape {
                op: "transpose",
                shape,
                reason: "rank must be at least 2".into(),
            });
        }
        let (rows, cols) = (shape[r - 2], shape[r - 1]);
        let out = kernels::transpose_blocks(self.value(a).data(), rows, cols);
        let mut new_shape = shape;
        new_shape.swap(r - 2, r - 1);
        let value = Tensor::new(new_shape, out)?;
        Ok(self.record(value, Op::TransposeLast2(a), &[a]))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(a).clone().reshaped(shape)?;
        Ok(self.record(value, Op::Reshape(a), &[a]))
    }

    /// Adds a bias vector along the last axis.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (sx, sb) = (self.shape(x), self.shape(bias));
        let n = *sx.last().unwrap_or(&0);
        if sb.len() != 1 || sb[0] != n {
            return Err(Error::ShapeMismatch {
                op: "add_bias",
                lhs: sx.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        let mut value = self.value(x).clone();
        let b = self.value(bias).data();
        for row in value.data_mut().chunks_mut(n) {
            row.iter_mut().zip(b).for_each(|(v, bv)| *v += bv);
        }
        Ok(self.record(value, Op::AddBias(x, bias), &[x, bias]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same_shape("add", a, b)?;
        let mut value = self.value(a).clone();
        value
            .data_mut()
            .iter_mut()
            .zip(self.value(b).data())
            .for_each(|(x, y)| *x += y);
        Ok(self.record(value, Op::Add(a, b), &[a, b]))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same_shape("mul", a, b)?;
        let mut value = self.value(a).clone();
        value
            .data_mut()
            .iter_mut()
            .zip(self.value(b).data())
            .for_each(|(x, y)| *x *= y);
        Ok(self.record(value, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let mut value = self.value(a).clone();
        value.data_mut().iter_mut().for_each(|x| *x *= factor);
        self.record(value, Op::Scale(a, factor), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let mut value = self.value(a).clone();
        value.data_mut().iter_mut().for_each(|x| *x = x.max(0.0));
        self.record(value, Op::Relu(a), &[a])
    }

    /// `same`-padded 1-D cross-correlation.
    ///
    /// `input` is `[channels_in×length]` or `[batch×channels_in×length]`,
    /// `kernels` is `[channels_out×channels_in×width]` with odd `width`, and
    /// `bias` is `[channels_out]`. The output keeps the input's rank and length.
    pub fn conv1d(&mut self, input: Var, kernels: Var, bias: Var) -> Result<Var> {
        let (batch, c_in, len) = self.batched_channels(input, "conv1d")?;
        let sk = self.shape(kernels).to_vec();
        if sk.len() != 3 || sk[1] != c_in {
            return Err(Error::ShapeMismatch {
                op: "conv1d",
                lhs: self.shape(input).to_vec(),
                rhs: sk,
            });
        }
        let (c_out, width) = (sk[0], sk[2]);
        if width % 2 == 0 {
            return Err(Error::InvalidShape {
                op: "conv1d",
                shape: sk,
                reason: "kernel width must be odd for same padding".into(),
            });
        }
        if self.shape(bias) != [c_out] {
            return Err(Error::ShapeMismatch {
                op: "conv1d bias",
                lhs: vec![c_out],
                rhs: self.shape(bias).to_vec(),
            });
        }
        let geom = kernels::ConvGeometry {
            batch,
            c_in,
            c_out,
            len,
            width,
        };
        let out = kernels::conv1d_forward(
            &geom,
            self.value(input).data(),
            self.value(kernels).data(),
            self.value(bias).data(),
        );
        let mut shape = self.shape(input).to_vec();
        let r = shape.len();
        shape[r - 2] = c_out;
        let value = Tensor::new(shape, out)?;
        Ok(self.record(
            value,
            Op::Conv1d {
                input,
                kernels,
                bias,
            },
            &[input, kernels, bias],
        ))
    }

    /// Non-overlapping max pooling along the last axis. A trailing partial
    /// window is dropped; ties route the gradient to the first maximum.
    pub fn maxpool1d(&mut self, input: Var, window: usize) -> Result<Var> {
        let shape = self.shape(input).to_vec();
        let len = *shape.last().unwrap_or(&0);
        if window == 0 || len < window || shape.len() < 2 {
            return Err(Error::InvalidShape {
                op: "maxpool1d",
                shape,
                reason: format!("length must be at least the window ({window})"),
            });
        }
        let out_len = len / window;
        let data = self.value(input).data();
        let rows = data.len() / len;
        let mut out = Vec::with_capacity(rows * out_len);
        let mut argmax = Vec::with_capacity(rows * out_len);
        for r in 0..rows {
            let row = &data[r * len..(r + 1) * len];
            for j in 0..out_len {
                let start = j * window;
                let mut best = start;
                for i in start + 1..start + window {
                    if row[i] > row[best] {
                        best = i;
                    }
                }
                out.push(row[best]);
                argmax.push(r * len + best);
            }
        }
        let mut new_shape = shape;
        *new_shape.last_mut().unwrap() = out_len;
        let value = Tensor::new(new_shape, out)?;
        Ok(self.record(value, Op::MaxPool1d { input, argmax }, &[input]))
    }

    /// Softmax along the last axis, computed with max subtraction.
    pub fn softmax(&mut self, input: Var) -> Result<Var> {
        let value = self.value(input);
        if value.data().iter().any(|x| x.is_nan()) {
            return Err(Error::NanInput { op: "softmax" });
        }
        let n = *value.shape().last().unwrap_or(&1);
        let mut value = value.clone();
        if n > 0 {
            for row in value.data_mut().chunks_mut(n) {
                kernels::softmax_in_place(row);
            }
        }
        Ok(self.record(value, Op::Softmax(input), &[input]))
    }

    /// Mean over the middle axis: `[B×L×D] → [B×D]`.
    pub fn mean_tokens(&mut self, input: Var) -> Result<Var> {
        let shape = self.shape(input).to_vec();
        if shape.len() != 3 || shape[1] == 0 {
            return Err(Error::InvalidShape {
                op: "mean_tokens",
                shape,
                reason: "expected non-empty [batch×tokens×width]".into(),
            });
        }
        let (b, l, d) = (shape[0], shape[1], shape[2]);
        let data = self.value(input).data();
        let mut out = vec![0.0; b * d];
        for i in 0..b {
            let acc = &mut out[i * d..(i + 1) * d];
            for t in 0..l {
                let row = &data[(i * l + t) * d..(i * l + t + 1) * d];
                acc.iter_mut().zip(row).for_each(|(a, x)| *a += x);
            }
            acc.iter_mut().for_each(|a| *a /= l as f64);
        }
        let value = Tensor::new(vec![b, d], out)?;
        Ok(self.record(value, Op::MeanTokens(input), &[input]))
    }

    /// Concatenates rank-2 tensors along the last axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = match parts.first() {
            Some(&p) => self.shape(p)[0],
            None => return Err(Error::Empty("concat input")),
        };
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let s = self.shape(p);
            if s.len() != 2 || s[0] != rows {
                return Err(Error::ShapeMismatch {
                    op: "concat",
                    lhs: self.shape(parts[0]).to_vec(),
                    rhs: s.to_vec(),
                });
            }
            widths.push(s[1]);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p).data()[r * w..(r + 1) * w]);
            }
        }
        let value = Tensor::new(vec![rows, total], out)?;
        Ok(self.record(value, Op::Concat(parts.to_vec()), parts))
    }

    pub fn sum(&mut self, input: Var) -> Var {
        let total = self.value(input).data().iter().sum();
        self.record(Tensor::scalar(total), Op::Sum(input), &[input])
    }

    /// Mean negative log-likelihood of `labels` under `softmax(logits)`.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let shape = self.shape(logits).to_vec();
        if shape.len() != 2 || shape[0] != labels.len() || shape[0] == 0 {
            return Err(Error::InvalidShape {
                op: "cross_entropy",
                shape,
                reason: format!("{} labels", labels.len()),
            });
        }
        let (batch, classes) = (shape[0], shape[1]);
        if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        let data = self.value(logits).data();
        if data.iter().any(|x| x.is_nan()) {
            return Err(Error::NanInput { op: "cross_entropy" });
        }
        let mut probs = data.to_vec();
        let mut loss = 0.0;
        for (row, &label) in probs.chunks_mut(classes).zip(labels) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let log_z = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            loss -= row[label] - log_z;
            kernels::softmax_in_place(row);
        }
        let value = Tensor::scalar(loss / batch as f64);
        Ok(self.record(
            value,
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            &[logits],
        ))
    }

    fn check_same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::ShapeMismatch {
                op,
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        Ok(())
    }

    fn batched_channels(&self, input: Var, op: &'static str) -> Result<(usize, usize, usize)> {
        match *self.shape(input) {
            [c, l] => Ok((1, c, l)),
            [b, c, l] => Ok((b, c, l)),
            ref s => Err(Error::InvalidShape {
                op,
                shape: s.to_vec(),
                reason: "expected [channels×length] or [batch×channels×length]".into(),
            }),
        }
    }

    /// Back-propagates from a scalar `loss`.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::NonScalarLoss(self.shape(loss).to_vec()));
        }
        for node in &mut self.nodes {
            node.grad = None;
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(dy) = grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &dy, &mut grads);
            grads[idx] = Some(dy);
        }

        for (node, g) in self.nodes.iter_mut().zip(grads) {
            if let (true, Some(g)) = (node.requires_grad, g) {
                node.grad = Some(Tensor::new(node.value.shape().to_vec(), g)?);
            }
        }
        Ok(())
    }

    fn propagate(&self, idx: usize, dy: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        let mut acc = |var: Var, f: &mut dyn FnMut(&mut [f64])| {
            if nodes[var.0].requires_grad {
                let len = nodes[var.0].value.len();
                let g = grads[var.0].get_or_insert_with(|| vec![0.0; len]);
                f(g);
            }
        };
        let val = |v: Var| nodes[v.0].value.data();
        let shp = |v: Var| nodes[v.0].value.shape();

        match &nodes[idx].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k, n) = (shp(*a)[0], shp(*a)[1], shp(*b)[1]);
                acc(*a, &mut |g| kernels::gemm_a_bt(dy, val(*b), m, n, k, g));
                acc(*b, &mut |g| kernels::gemm_at_b(val(*a), dy, m, k, n, g));
            }
            Op::BatchMatMul(a, b) => {
                let (batch, m, k, n) = (shp(*a)[0], shp(*a)[1], shp(*a)[2], shp(*b)[2]);
                acc(*a, &mut |g| {
                    for i in 0..batch {
                        kernels::gemm_a_bt(
                            &dy[i * m * n..(i + 1) * m * n],
                            &val(*b)[i * k * n..(i + 1) * k * n],
                            m,
                            n,
                            k,
                            &mut g[i * m * k..(i + 1) * m * k],
                        );
                    }
                });
                acc(*b, &mut |g| {
                    for i in 0..batch {
                        kernels::gemm_at_b(
                            &val(*a)[i * m * k..(i + 1) * m * k],
                            &dy[i * m * n..(i + 1) * m * n],
                            m,
                            k,
                            n,
                            &mut g[i * k * n..(i + 1) * k * n],
                        );
                    }
                });
            }
            Op::TransposeLast2(a) => {
                let s = shp(*a);
                let (rows, cols) = (s[s.len() - 2], s[s.len() - 1]);
                // dy has the swapped layout [.., cols, rows].
                let back = kernels::transpose_blocks(dy, cols, rows);
                acc(*a, &mut |g| kernels::add_assign(g, &back));
            }
            Op::Reshape(a) => acc(*a, &mut |g| kernels::add_assign(g, dy)),
            Op::AddBias(x, b) => {
                acc(*x, &mut |g| kernels::add_assign(g, dy));
                let n = shp(*b)[0];
                acc(*b, &mut |g| {
                    for row in dy.chunks(n) {
                        kernels::add_assign(g, row);
                    }
                });
            }
            Op::Add(a, b) => {
                acc(*a, &mut |g| kernels::add_assign(g, dy));
                acc(*b, &mut |g| kernels::add_assign(g, dy));
            }
            Op::Mul(a, b) => {
                acc(*a, &mut |g| {
                    for ((gi, d), bv) in g.iter_mut().zip(dy).zip(val(*b)) {
                        *gi += d * bv;
                    }
                });
                acc(*b, &mut |g| {
                    for ((gi, d), av) in g.iter_mut().zip(dy).zip(val(*a)) {
                        *gi += d * av;
                    }
                });
            }
            Op::Scale(a, c) => acc(*a, &mut |g| {
                g.iter_mut().zip(dy).for_each(|(gi, d)| *gi += c * d);
            }),
            Op::Relu(a) => acc(*a, &mut |g| {
                for ((gi, d), x) in g.iter_mut().zip(dy).zip(val(*a)) {
                    if *x > 0.0 {
                        *gi += d;
                    }
                }
            }),
            Op::Conv1d {
                input,
                kernels: w,
                bias,
            } => {
                let si = shp(*input);
                let sk = shp(*w);
                let geom = kernels::ConvGeometry {
                    batch: if si.len() == 3 { si[0] } else { 1 },
                    c_in: sk[1],
                    c_out: sk[0],
                    len: si[si.len() - 1],
                    width: sk[2],
                };
                acc(*input, &mut |g| {
                    kernels::conv1d_backward_input(&geom, dy, val(*w), g)
                });
                acc(*w, &mut |g| {
                    kernels::conv1d_backward_kernels(&geom, dy, val(*input), g)
                });
                acc(*bias, &mut |g| {
                    for (row, chunk) in dy.chunks(geom.len).enumerate() {
                        g[row % geom.c_out] += chunk.iter().sum::<f64>();
                    }
                });
            }
            Op::MaxPool1d { input, argmax } => acc(*input, &mut |g| {
                for (d, &i) in dy.iter().zip(argmax) {
                    g[i] += d;
                }
            }),
            Op::Softmax(a) => {
                let y = nodes[idx].value.data();
                let n = *shp(*a).last().unwrap_or(&1);
                acc(*a, &mut |g| {
                    for ((gr, yr), dr) in g.chunks_mut(n).zip(y.chunks(n)).zip(dy.chunks(n)) {
                        let dot: f64 = yr.iter().zip(dr).map(|(p, d)| p * d).sum();
                        for ((gi, p), d) in gr.iter_mut().zip(yr).zip(dr) {
                            *gi += p * (d - dot);
                        }
                    }
                });
            }
            Op::MeanTokens(a) => {
                let s = shp(*a);
                let (b, l, d) = (s[0], s[1], s[2]);
                acc(*a, &mut |g| {
                    for i in 0..b {
                        let src = &dy[i * d..(i + 1) * d];
                        for t in 0..l {
                            let dst = &mut g[(i * l + t) * d..(i * l + t + 1) * d];
                            dst.iter_mut().zip(src).for_each(|(gi, x)| *gi += x / l as f64);
                        }
                    }
                });
            }
            Op::Concat(parts) => {
                let total = nodes[idx].value.shape()[1];
                let mut offset = 0;
                for &p in parts {
                    let w = shp(p)[1];
                    acc(p, &mut |g| {
                        for (r, row) in g.chunks_mut(w).enumerate() {
                            kernels::add_assign(row, &dy[r * total + offset..r * total + offset + w]);
                        }
                    });
                    offset += w;
                }
            }
            Op::Sum(a) => acc(*a, &mut |g| g.iter_mut().for_each(|gi| *gi += dy[0])),
            Op::CrossEntropy {
                logits,
                labels,
                probs,
            } => {
                let classes = shp(*logits)[1];
                let scale = dy[0] / labels.len() as f64;
                acc(*logits, &mut |g| {
                    for (r, &label) in labels.iter().enumerate() {
                        for c in 0..classes {
                            let target = if c == label { 1.0 } else { 0.0 };
                            g[r * classes + c] += scale * (probs[r * classes + c] - target);
                        }
                    }
                });
            }
        }
    }
}
