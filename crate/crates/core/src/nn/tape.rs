//! Reverse-mode differentiation over small dense matrices.
//!
//! A [`Tape`] records every operation eagerly (values are computed on push) and
//! [`Tape::backward`] walks the record in reverse. Parameter leaves remember the
//! network slot and flat offset they were copied from, so gradients come back as
//! flat vectors aligned with [`NetParams`](super::NetParams).

use alloc::vec;
use alloc::vec::Vec;

use super::{Gradient, NetParams, NnError};
use crate::math;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NnError> {
        if data.len() != rows * cols {
            return Err(NnError::Shape { expected: rows * cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn column(data: Vec<f64>) -> Self {
        let rows = data.len();
        Self { rows, cols: 1, data }
    }

    pub fn scalar(x: f64) -> Self {
        Self { rows: 1, cols: 1, data: vec![x] }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// Parameter leaves for one registered network.
#[derive(Clone, Debug)]
pub struct NetVars {
    pub(crate) slot: usize,
    pub(crate) layers: Vec<(Var, Var)>,
    pub(crate) len: usize,
}

#[derive(Clone, Debug)]
enum Op {
    Constant,
    Param { slot: usize, offset: usize },
    Affine { x: Var, w: Var, b: Var },
    Tanh(Var),
    Relu(Var),
    LogSoftmax(Var),
    Gather { x: Var, idx: Vec<usize> },
    MaxGather { x: Var, arg: Vec<usize> },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Min(Var, Var),
    Scale(Var, f64),
    Exp(Var),
    Square(Var),
    Clip { x: Var, lo: f64, hi: f64 },
    RowSum(Var),
    Mean(Var),
}

struct Node {
    value: Matrix,
    op: Op,
    needs_grad: bool,
}

/// Eager computation record supporting the primitives needed by the RL losses:
/// affine maps, tanh/relu, log-softmax, gathers, elementwise arithmetic,
/// clipping and means.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    slots: usize,
}

/// Additive logit penalty for illegal actions.
pub const MASK_PENALTY: f64 = -1e9;

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    /// Value of a 1x1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data[0]
    }

    fn push(&mut self, value: Matrix, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        let m = &self.nodes[v.0].value;
        (m.rows, m.cols)
    }

    pub fn constant(&mut self, m: Matrix) -> Var {
        self.push(m, Op::Constant, false)
    }

    /// Copy a network's weights onto the tape as differentiable leaves.
    pub fn register(&mut self, net: &NetParams) -> NetVars {
        let slot = self.slots;
        self.slots += 1;
        let mut layers = Vec::new();
        let mut offset = 0;
        for (fan_in, fan_out) in net.arch.layer_shapes() {
            let w_len = fan_in * fan_out;
            let w = Matrix { rows: fan_in, cols: fan_out, data: net.params[offset..offset + w_len].to_vec() };
            let wv = self.push(w, Op::Param { slot, offset }, true);
            offset += w_len;
            let b = Matrix { rows: 1, cols: fan_out, data: net.params[offset..offset + fan_out].to_vec() };
            let bv = self.push(b, Op::Param { slot, offset }, true);
            offset += fan_out;
            layers.push((wv, bv));
        }
        NetVars { slot, layers, len: offset }
    }

    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var, NnError> {
        let (n, fan_in) = self.shape(x);
        let (wr, fan_out) = self.shape(w);
        if wr != fan_in {
            return Err(NnError::Shape { expected: wr, got: fan_in });
        }
        if self.shape(b) != (1, fan_out) {
            return Err(NnError::Shape { expected: fan_out, got: self.shape(b).1 });
        }
        let mut out = Matrix::zeros(n, fan_out);
        affine_kernel(
            &self.nodes[x.0].value,
            &self.nodes[w.0].value,
            &self.nodes[b.0].value.data,
            &mut out,
        );
        let ng = self.ng(x) || self.ng(w) || self.ng(b);
        Ok(self.push(out, Op::Affine { x, w, b }, ng))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let mut v = self.nodes[a.0].value.clone();
        v.data.iter_mut().for_each(|x| *x = math::tanh(*x));
        let ng = self.ng(a);
        self.push(v, Op::Tanh(a), ng)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let mut v = self.nodes[a.0].value.clone();
        v.data.iter_mut().for_each(|x| *x = if *x > 0.0 { *x } else { 0.0 });
        let ng = self.ng(a);
        self.push(v, Op::Relu(a), ng)
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(&mut self, a: Var) -> Var {
        let src = &self.nodes[a.0].value;
        let mut v = src.clone();
        for i in 0..src.rows {
            let row = &mut v.data[i * src.cols..(i + 1) * src.cols];
            log_softmax_inplace(row);
        }
        let ng = self.ng(a);
        self.push(v, Op::LogSoftmax(a), ng)
    }

    /// Row-wise log-softmax with illegal entries pushed down by [`MASK_PENALTY`].
    /// `masks` holds one row of legality flags per input row.
    pub fn masked_log_softmax(&mut self, logits: Var, masks: &[Vec<bool>]) -> Result<Var, NnError> {
        let (n, k) = self.shape(logits);
        if masks.len() != n {
            return Err(NnError::Shape { expected: n, got: masks.len() });
        }
        let mut pen = Matrix::zeros(n, k);
        for (i, m) in masks.iter().enumerate() {
            if m.len() != k {
                return Err(NnError::Shape { expected: k, got: m.len() });
            }
            for j in 0..k {
                if !m[j] {
                    pen.data[i * k + j] = MASK_PENALTY;
                }
            }
        }
        let pen = self.constant(pen);
        let shifted = self.add(logits, pen)?;
        Ok(self.log_softmax(shifted))
    }

    /// Select one column per row: `out[i] = a[i, idx[i]]`.
    pub fn gather(&mut self, a: Var, idx: &[usize]) -> Result<Var, NnError> {
        let (n, k) = self.shape(a);
        if idx.len() != n {
            return Err(NnError::Shape { expected: n, got: idx.len() });
        }
        let src = &self.nodes[a.0].value;
        let mut data = Vec::with_capacity(n);
        for (i, &j) in idx.iter().enumerate() {
            if j >= k {
                return Err(NnError::Index { index: j, len: k });
            }
            data.push(src.data[i * k + j]);
        }
        let ng = self.ng(a);
        Ok(self.push(Matrix::column(data), Op::Gather { x: a, idx: idx.to_vec() }, ng))
    }

    /// Row-wise max over `mask`-enabled columns (ties to the lowest index).
    pub fn max_gather(&mut self, a: Var, masks: &[Vec<bool>]) -> Result<Var, NnError> {
        let (n, k) = self.shape(a);
        if masks.len() != n {
            return Err(NnError::Shape { expected: n, got: masks.len() });
        }
        let src = &self.nodes[a.0].value;
        let mut data = Vec::with_capacity(n);
        let mut arg = Vec::with_capacity(n);
        for i in 0..n {
            let j = math::argmax_masked(src.row(i), &masks[i]).ok_or(NnError::NoLegalAction)?;
            if masks[i].len() != k {
                return Err(NnError::Shape { expected: k, got: masks[i].len() });
            }
            arg.push(j);
            data.push(src.data[i * k + j]);
        }
        let ng = self.ng(a);
        Ok(self.push(Matrix::column(data), Op::MaxGather { x: a, arg }, ng))
    }

    fn binary(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Matrix, NnError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(NnError::Shape { expected: sa.0 * sa.1, got: sb.0 * sb.1 });
        }
        let va = &self.nodes[a.0].value;
        let vb = &self.nodes[b.0].value;
        let data = va.data.iter().zip(&vb.data).map(|(&x, &y)| f(x, y)).collect();
        Ok(Matrix { rows: sa.0, cols: sa.1, data })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let m = self.binary(a, b, |x, y| x + y)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(m, Op::Add(a, b), ng))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let m = self.binary(a, b, |x, y| x - y)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(m, Op::Sub(a, b), ng))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let m = self.binary(a, b, |x, y| x * y)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(m, Op::Mul(a, b), ng))
    }

    /// Elementwise minimum; on ties the gradient flows to `a`.
    pub fn min(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let m = self.binary(a, b, |x, y| if x <= y { x } else { y })?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(m, Op::Min(a, b), ng))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let mut v = self.nodes[a.0].value.clone();
        v.data.iter_mut().for_each(|x| *x *= k);
        let ng = self.ng(a);
        self.push(v, Op::Scale(a, k), ng)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let mut v = self.nodes[a.0].value.clone();
        v.data.iter_mut().for_each(|x| *x = math::exp(*x));
        let ng = self.ng(a);
        self.push(v, Op::Exp(a), ng)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let mut v = self.nodes[a.0].value.clone();
        v.data.iter_mut().for_each(|x| *x *= *x);
        let ng = self.ng(a);
        self.push(v, Op::Square(a), ng)
    }

    /// Clamp into `[lo, hi]`; the derivative is 1 inside the closed interval.
    pub fn clip(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let mut v = self.nodes[a.0].value.clone();
        v.data.iter_mut().for_each(|x| *x = x.clamp(lo, hi));
        let ng = self.ng(a);
        self.push(v, Op::Clip { x: a, lo, hi }, ng)
    }

    pub fn row_sum(&mut self, a: Var) -> Var {
        let src = &self.nodes[a.0].value;
        let data = (0..src.rows).map(|i| src.row(i).iter().sum()).collect();
        let ng = self.ng(a);
        self.push(Matrix::column(data), Op::RowSum(a), ng)
    }

    /// Mean over every entry, producing a 1x1 node.
    pub fn mean(&mut self, a: Var) -> Var {
        let src = &self.nodes[a.0].value;
        let n = src.data.len().max(1) as f64;
        let m = src.data.iter().sum::<f64>() / n;
        let ng = self.ng(a);
        self.push(Matrix::scalar(m), Op::Mean(a), ng)
    }

    /// Reverse pass from a 1x1 node. Returns one flat gradient per registered
    /// network, ordered by registration.
    pub fn backward(&self, loss: Var) -> Result<Vec<Gradient>, NnError> {
        if self.shape(loss) != (1, 1) {
            let (r, c) = self.shape(loss);
            return Err(NnError::Shape { expected: 1, got: r * c });
        }
        let mut slot_len = vec![0usize; self.slots];
        for node in &self.nodes {
            if let Op::Param { slot, offset } = node.op {
                slot_len[slot] = slot_len[slot].max(offset + node.value.data.len());
            }
        }
        let mut out: Vec<Gradient> = slot_len.iter().map(|&l| Gradient(vec![0.0; l])).collect();

        let mut grads: Vec<Option<Vec<f64>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            if !node.needs_grad {
                continue;
            }
            match &node.op {
                Op::Constant => {}
                Op::Param { slot, offset } => {
                    let dst = &mut out[*slot].0[*offset..*offset + g.len()];
                    for (d, x) in dst.iter_mut().zip(&g) {
                        *d += x;
                    }
                }
                Op::Affine { x, w, b } => {
                    let xv = &self.nodes[x.0].value;
                    let wv = &self.nodes[w.0].value;
                    let (n, fan_in, fan_out) = (xv.rows, xv.cols, wv.cols);
                    if self.ng(*b) {
                        let mut gb = vec![0.0; fan_out];
                        for i in 0..n {
                            for j in 0..fan_out {
                                gb[j] += g[i * fan_out + j];
                            }
                        }
                        accumulate(&mut grads, *b, gb);
                    }
                    if self.ng(*w) {
                        let mut gw = vec![0.0; fan_in * fan_out];
                        for i in 0..n {
                            let grow = &g[i * fan_out..(i + 1) * fan_out];
                            for k in 0..fan_in {
                                let xik = xv.data[i * fan_in + k];
                                if xik == 0.0 {
                                    continue;
                                }
                                let dst = &mut gw[k * fan_out..(k + 1) * fan_out];
                                for (d, &gg) in dst.iter_mut().zip(grow) {
                                    *d += xik * gg;
                                }
                            }
                        }
                        accumulate(&mut grads, *w, gw);
                    }
                    if self.ng(*x) {
                        let mut gx = vec![0.0; n * fan_in];
                        for i in 0..n {
                            let grow = &g[i * fan_out..(i + 1) * fan_out];
                            for k in 0..fan_in {
                                let wrow = &wv.data[k * fan_out..(k + 1) * fan_out];
                                gx[i * fan_in + k] = wrow.iter().zip(grow).map(|(a, b)| a * b).sum();
                            }
                        }
                        accumulate(&mut grads, *x, gx);
                    }
                }
                Op::Tanh(a) => {
                    let y = &node.value.data;
                    let ga = g.iter().zip(y).map(|(gg, yy)| gg * (1.0 - yy * yy)).collect();
                    accumulate(&mut grads, *a, ga);
                }
                Op::Relu(a) => {
                    let x = &self.nodes[a.0].value.data;
                    let ga = g.iter().zip(x).map(|(gg, xx)| if *xx > 0.0 { *gg } else { 0.0 }).collect();
                    accumulate(&mut grads, *a, ga);
                }
                Op::LogSoftmax(a) => {
                    let y = &node.value;
                    let mut ga = vec![0.0; g.len()];
                    for i in 0..y.rows {
                        let lo = i * y.cols;
                        let gs: f64 = g[lo..lo + y.cols].iter().sum();
                        for j in 0..y.cols {
                            ga[lo + j] = g[lo + j] - math::exp(y.data[lo + j]) * gs;
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::Gather { x, idx } | Op::MaxGather { x, arg: idx } => {
                    let (n, k) = self.shape(*x);
                    let mut ga = vec![0.0; n * k];
                    for (i, &j) in idx.iter().enumerate() {
                        ga[i * k + j] = g[i];
                    }
                    accumulate(&mut grads, *x, ga);
                }
                Op::Add(a, b) => {
                    if self.ng(*a) {
                        accumulate(&mut grads, *a, g.clone());
                    }
                    if self.ng(*b) {
                        accumulate(&mut grads, *b, g);
                    }
                }
                Op::Sub(a, b) => {
                    if self.ng(*b) {
                        accumulate(&mut grads, *b, g.iter().map(|x| -x).collect());
                    }
                    if self.ng(*a) {
                        accumulate(&mut grads, *a, g);
                    }
                }
                Op::Mul(a, b) => {
                    let va = &self.nodes[a.0].value.data;
                    let vb = &self.nodes[b.0].value.data;
                    if self.ng(*a) {
                        accumulate(&mut grads, *a, g.iter().zip(vb).map(|(x, y)| x * y).collect());
                    }
                    if self.ng(*b) {
                        accumulate(&mut grads, *b, g.iter().zip(va).map(|(x, y)| x * y).collect());
                    }
                }
                Op::Min(a, b) => {
                    let va = &self.nodes[a.0].value.data;
                    let vb = &self.nodes[b.0].value.data;
                    let take_a: Vec<bool> = va.iter().zip(vb).map(|(x, y)| x <= y).collect();
                    if self.ng(*a) {
                        let ga = g.iter().zip(&take_a).map(|(x, &t)| if t { *x } else { 0.0 }).collect();
                        accumulate(&mut grads, *a, ga);
                    }
                    if self.ng(*b) {
                        let gb = g.iter().zip(&take_a).map(|(x, &t)| if t { 0.0 } else { *x }).collect();
                        accumulate(&mut grads, *b, gb);
                    }
                }
                Op::Scale(a, k) => {
                    accumulate(&mut grads, *a, g.iter().map(|x| x * k).collect());
                }
                Op::Exp(a) => {
                    let y = &node.value.data;
                    accumulate(&mut grads, *a, g.iter().zip(y).map(|(x, yy)| x * yy).collect());
                }
                Op::Square(a) => {
                    let x = &self.nodes[a.0].value.data;
                    accumulate(&mut grads, *a, g.iter().zip(x).map(|(gg, xx)| 2.0 * xx * gg).collect());
                }
                Op::Clip { x, lo, hi } => {
                    let xv = &self.nodes[x.0].value.data;
                    let ga = g
                        .iter()
                        .zip(xv)
                        .map(|(gg, xx)| if *xx >= *lo && *xx <= *hi { *gg } else { 0.0 })
                        .collect();
                    accumulate(&mut grads, *x, ga);
                }
                Op::RowSum(a) => {
                    let (n, k) = self.shape(*a);
                    let mut ga = vec![0.0; n * k];
                    for i in 0..n {
                        for j in 0..k {
                            ga[i * k + j] = g[i];
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::Mean(a) => {
                    let len = self.nodes[a.0].value.data.len();
                    let share = g[0] / len.max(1) as f64;
                    accumulate(&mut grads, *a, vec![share; len]);
                }
            }
        }
        Ok(out)
    }

    /// Gradient for a single registered net.
    pub fn gradient_for(&self, loss: Var, vars: &NetVars) -> Result<Gradient, NnError> {
        let mut all = self.backward(loss)?;
        let mut g = core::mem::take(&mut all[vars.slot]);
        g.0.resize(vars.len, 0.0);
        Ok(g)
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, g: Vec<f64>) {
    match &mut grads[v.0] {
        Some(existing) => {
            for (e, x) in existing.iter_mut().zip(&g) {
                *e += x;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

/// `out = x W + b`, skipping zero inputs (one-hot features are common).
pub(crate) fn affine_kernel(x: &Matrix, w: &Matrix, b: &[f64], out: &mut Matrix) {
    let (n, fan_in, fan_out) = (x.rows, x.cols, w.cols);
    for i in 0..n {
        let orow = &mut out.data[i * fan_out..(i + 1) * fan_out];
        orow.copy_from_slice(b);
        let xrow = &x.data[i * fan_in..(i + 1) * fan_in];
        for (k, &xik) in xrow.iter().enumerate() {
            if xik == 0.0 {
                continue;
            }
            let wrow = &w.data[k * fan_out..(k + 1) * fan_out];
            for (o, &wv) in orow.iter_mut().zip(wrow) {
                *o += xik * wv;
            }
        }
    }
}

pub(crate) fn log_softmax_inplace(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + math::ln(row.iter().map(|&x| math::exp(x - max)).sum::<f64>());
    row.iter_mut().for_each(|x| *x -= lse);
}
