use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ParamId, ParamStore, Real, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

/// Forward-pass mode. Dropout is active only in `Train`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    Train { seed: u64 },
}

pub(crate) enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Log(Var),
    ClampMin(Var, T),
    Softmax { x: Var, axis: usize },
    MaskLastAxis { x: Var, keep: Vec<bool> },
    Concat { inputs: Vec<Var>, axis: usize },
    Reshape(Var),
    Gather { table: Var, rows: Vec<Option<usize>> },
    Dropout { x: Var, scale: Vec<T> },
    ConvRows { x: Var, filters: Var, bias: Var },
    MaxPoolRows { x: Var, width: usize, argmax: Vec<usize> },
    Sum(Var),
    Index { x: Var, index: usize },
    Lstm {
        x_proj: Var,
        w_hh: Var,
        steps: usize,
        reverse: bool,
        cache: LstmCache<T>,
    },
}

impl<T> Op<T> {
    #[cfg_attr(not(test), allow(dead_code))]
    pub(crate) fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Transpose(..) => "transpose",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::Relu(..) => "relu",
            Op::Tanh(..) => "tanh",
            Op::Sigmoid(..) => "sigmoid",
            Op::Log(..) => "log",
            Op::ClampMin(..) => "clamp_min",
            Op::Softmax { .. } => "softmax",
            Op::MaskLastAxis { .. } => "mask_last_axis",
            Op::Concat { .. } => "concat",
            Op::Reshape(..) => "reshape",
            Op::Gather { .. } => "gather",
            Op::Dropout { .. } => "dropout",
            Op::ConvRows { .. } => "conv_rows",
            Op::MaxPoolRows { .. } => "max_pool_rows",
            Op::Sum(..) => "sum",
            Op::Index { .. } => "index",
            Op::Lstm { .. } => "lstm",
        }
    }

    pub(crate) fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => vec![*a, *b],
            Op::Transpose(x)
            | Op::Scale(x, _)
            | Op::Relu(x)
            | Op::Tanh(x)
            | Op::Sigmoid(x)
            | Op::Log(x)
            | Op::ClampMin(x, _)
            | Op::Reshape(x)
            | Op::Sum(x) => vec![*x],
            Op::Softmax { x, .. }
            | Op::MaskLastAxis { x, .. }
            | Op::Dropout { x, .. }
            | Op::MaxPoolRows { x, .. }
            | Op::Index { x, .. } => vec![*x],
            Op::Concat { inputs, .. } => inputs.clone(),
            Op::Gather { table, .. } => vec![*table],
            Op::ConvRows { x, filters, bias } => vec![*x, *filters, *bias],
            Op::Lstm { x_proj, w_hh, .. } => vec![*x_proj, *w_hh],
        }
    }
}

/// Activations saved by the fused LSTM op, indexed by sequence position.
pub(crate) struct LstmCache<T> {
    /// Post-activation gates (i, f, g, o), `4H` per position.
    pub gates: Vec<T>,
    /// Cell state, `H` per position.
    pub cells: Vec<T>,
    /// tanh of the cell state, `H` per position.
    pub tanh_cells: Vec<T>,
}

pub(crate) struct Node<T> {
    pub value: Option<Tensor<T>>,
    pub param: Option<ParamId>,
    pub op: Op<T>,
    pub requires_grad: bool,
}

/// A single forward computation, recorded for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, which is a topological order of
/// the dataflow graph; `backward` walks them in reverse. Parameters are read
/// from the borrowed store without copying.
pub struct Graph<'p, T> {
    pub(crate) params: &'p ParamStore<T>,
    pub(crate) nodes: Vec<Node<T>>,
    param_vars: HashMap<ParamId, Var>,
    mode: Mode,
    rng: ChaCha8Rng,
}

impl<'p, T: Real> Graph<'p, T> {
    pub fn new(params: &'p ParamStore<T>, mode: Mode) -> Self {
        let seed = match mode {
            Mode::Train { seed } => seed,
            Mode::Eval => 0,
        };
        Graph {
            params,
            nodes: Vec::new(),
            param_vars: HashMap::new(),
            mode,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn is_training(&self) -> bool {
        matches!(self.mode, Mode::Train { .. })
    }

    pub fn params(&self) -> &'p ParamStore<T> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        let node = &self.nodes[v.0];
        match (&node.value, node.param) {
            (Some(t), _) => t,
            (None, Some(id)) => self.params.get(id),
            (None, None) => unreachable!("node without value"),
        }
    }

    /// Distance of the recorded computation from its nearest kink: the
    /// smallest |input| of any relu, |input − floor| of any clamp, and gap
    /// between the two largest entries of any max-pool window. Exact zeros
    /// are skipped; they come from padding rows that stay zero, or from
    /// identical computations that move together.
    pub fn kink_margin(&self) -> f64 {
        let mut margin = f64::INFINITY;
        for node in &self.nodes {
            match &node.op {
                Op::Relu(x) => {
                    for v in self.value(*x).data() {
                        margin = nonzero_min(margin, v.to_f64().unwrap_or(0.0).abs());
                    }
                }
                Op::ClampMin(x, floor) => {
                    for v in self.value(*x).data() {
                        margin = nonzero_min(margin, (*v - *floor).to_f64().unwrap_or(0.0).abs());
                    }
                }
                Op::MaxPoolRows { x, width, argmax } => {
                    let d = self.value(*x).data();
                    for &best in argmax {
                        let start = best - (best % self.value(*x).shape().last().copied().unwrap_or(1)) % width;
                        for i in start..start + width {
                            let gap = (d[best] - d[i]).to_f64().unwrap_or(0.0);
                            if i != best {
                                margin = nonzero_min(margin, gap);
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        margin
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Parameter leaf. Repeated calls for the same id return the same `Var`.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.param_vars.get(&id) {
            return v;
        }
        let v = Var(self.nodes.len());
        self.nodes.push(Node {
            value: None,
            param: Some(id),
            op: Op::Leaf,
            requires_grad: self.params.is_trainable(id),
        });
        self.param_vars.insert(id, v);
        v
    }

    /// Constant leaf; never receives a gradient.
    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.leaf(t, false)
    }

    /// Differentiable leaf that is not a stored parameter.
    pub fn variable(&mut self, t: Tensor<T>) -> Var {
        self.leaf(t, true)
    }

    fn leaf(&mut self, t: Tensor<T>, requires_grad: bool) -> Var {
        let v = Var(self.nodes.len());
        self.nodes.push(Node {
            value: Some(t),
            param: None,
            op: Op::Leaf,
            requires_grad,
        });
        v
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        let requires_grad = op.inputs().iter().any(|v| self.nodes[v.0].requires_grad);
        let v = Var(self.nodes.len());
        self.nodes.push(Node {
            value: Some(value),
            param: None,
            op,
            requires_grad,
        });
        v
    }

    /// Matrix product of `[m×k]` and `[k×n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = matmul_values(self.value(a), self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        if xv.rank() != 2 {
            return Err(Error::Contract(format!("transpose expects a matrix, got {:?}", xv.shape())));
        }
        let out = transpose_values(xv);
        Ok(self.push(out, Op::Transpose(x)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.broadcast_binary("add", a, b, |x, y| x + y)?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.broadcast_binary("sub", a, b, |x, y| x - y)?;
        Ok(self.push(out, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.broadcast_binary("mul", a, b, |x, y| x * y)?;
        Ok(self.push(out, Op::Mul(a, b)))
    }

    fn broadcast_binary(&self, op: &'static str, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
        let (av, bv) = (self.value(a), self.value(b));
        let shape = broadcast_shape(op, av.shape(), bv.shape())?;
        let (na, nb) = (av.numel(), bv.numel());
        let n = na.max(nb);
        let (ad, bd) = (av.data(), bv.data());
        let data = (0..n).map(|i| f(ad[i % na], bd[i % nb])).collect();
        Tensor::new(shape, data)
    }

    pub fn scale(&mut self, x: Var, c: T) -> Var {
        let out = self.value(x).map(|v| v * c);
        self.push(out, Op::Scale(x, c))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| if v > T::zero() { v } else { T::zero() });
        self.push(out, Op::Relu(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v.tanh());
        self.push(out, Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = self.value(x).map(sigmoid);
        self.push(out, Op::Sigmoid(x))
    }

    pub fn log(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v.ln());
        self.push(out, Op::Log(x))
    }

    /// `max(x, floor)`; the gradient is zero where the floor is active.
    pub fn clamp_min(&mut self, x: Var, floor: T) -> Var {
        let out = self.value(x).map(|v| if v < floor { floor } else { v });
        self.push(out, Op::ClampMin(x, floor))
    }

    /// Numerically stable softmax along `axis`.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let out = softmax_values(self.value(x), axis)?;
        Ok(self.push(out, Op::Softmax { x, axis }))
    }

    /// Sets entries whose last-axis index is not kept to −∞.
    pub fn mask_last_axis(&mut self, x: Var, keep: &[bool]) -> Result<Var> {
        let xv = self.value(x);
        let last = *xv.shape().last().expect("rank ≥ 1");
        if keep.len() != last {
            return Err(Error::dim("mask_last_axis", xv.shape(), &[keep.len()]));
        }
        let data = xv
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| if keep[i % last] { v } else { T::neg_infinity() })
            .collect();
        let out = Tensor::new(xv.shape().to_vec(), data)?;
        Ok(self.push(out, Op::MaskLastAxis { x, keep: keep.to_vec() }))
    }

    /// Concatenates along `axis`; all other extents must agree.
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = inputs
            .first()
            .ok_or_else(|| Error::Contract("concat of zero tensors".into()))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(Error::Contract(format!("concat axis {axis} out of range for {base:?}")));
        }
        let mut out_shape = base.clone();
        out_shape[axis] = 0;
        for &v in inputs {
            let s = self.shape(v);
            let compatible = s.len() == base.len()
                && s.iter().zip(&base).enumerate().all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(Error::dim("concat", &base, s));
            }
            out_shape[axis] += s[axis];
        }
        let outer: usize = base[..axis].iter().product();
        let mut data = Vec::with_capacity(out_shape.iter().product());
        for o in 0..outer {
            for &v in inputs {
                let t = self.value(v);
                let chunk = t.numel() / outer;
                data.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let out = Tensor::new(out_shape, data)?;
        Ok(self.push(out, Op::Concat { inputs: inputs.to_vec(), axis }))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(x).clone().reshape(shape)?;
        Ok(self.push(out, Op::Reshape(x)))
    }

    /// Row lookup into a `[V×d]` table; `None` yields a zero row.
    pub fn gather_rows(&mut self, table: Var, rows: &[Option<usize>]) -> Result<Var> {
        let tv = self.value(table);
        if tv.rank() != 2 {
            return Err(Error::Contract(format!("gather_rows expects a matrix table, got {:?}", tv.shape())));
        }
        if rows.is_empty() {
            return Err(Error::Contract("gather_rows with no rows".into()));
        }
        let (v, d) = (tv.shape()[0], tv.shape()[1]);
        let mut data = vec![T::zero(); rows.len() * d];
        for (r, idx) in rows.iter().enumerate() {
            if let Some(i) = *idx {
                if i >= v {
                    return Err(Error::Contract(format!("gather_rows index {i} out of range for {v} rows")));
                }
                data[r * d..(r + 1) * d].copy_from_slice(tv.row(i));
            }
        }
        let out = Tensor::new(vec![rows.len(), d], data)?;
        Ok(self.push(out, Op::Gather { table, rows: rows.to_vec() }))
    }

    /// Inverted dropout. Identity in evaluation mode or when `p == 0`.
    pub fn dropout(&mut self, x: Var, p: f64) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Config(format!("dropout probability {p} outside [0, 1)")));
        }
        if !self.is_training() || p == 0.0 {
            return Ok(x);
        }
        let keep_scale = T::lit(1.0 / (1.0 - p));
        let n = self.value(x).numel();
        let scale: Vec<T> = (0..n)
            .map(|_| if self.rng.gen::<f64>() < p { T::zero() } else { keep_scale })
            .collect();
        let xv = self.value(x);
        let data = xv.data().iter().zip(&scale).map(|(&a, &s)| a * s).collect();
        let out = Tensor::new(xv.shape().to_vec(), data)?;
        Ok(self.push(out, Op::Dropout { x, scale }))
    }

    /// Valid, stride-1 convolution along the last axis with kernel height 1.
    ///
    /// `x` is `[channels×rows×cols]`, `filters` is `[F×channels×1×k]`, `bias`
    /// is `[F]`; the result is `[F×rows×(cols−k+1)]`.
    pub fn conv_rows(&mut self, x: Var, filters: Var, bias: Var) -> Result<Var> {
        let out = conv_rows_values(self.value(x), self.value(filters), self.value(bias))?;
        Ok(self.push(out, Op::ConvRows { x, filters, bias }))
    }

    /// Non-overlapping max pooling along the last axis; trailing columns that
    /// do not fill a window are dropped.
    pub fn max_pool_rows(&mut self, x: Var, width: usize) -> Result<Var> {
        let (out, argmax) = max_pool_rows_values(self.value(x), width)?;
        Ok(self.push(out, Op::MaxPoolRows { x, width, argmax }))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().copied().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    /// Selects one scalar by flat index.
    pub fn index(&mut self, x: Var, index: usize) -> Result<Var> {
        let xv = self.value(x);
        let v = *xv
            .data()
            .get(index)
            .ok_or_else(|| Error::Contract(format!("index {index} out of range for {:?}", xv.shape())))?;
        Ok(self.push(Tensor::scalar(v), Op::Index { x, index }))
    }

    /// Flattens to rank 1.
    pub fn flatten(&mut self, x: Var) -> Result<Var> {
        let n = self.value(x).numel();
        self.reshape(x, &[n])
    }

    /// Dot product of two equally-shaped tensors.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::dim("dot", self.shape(a), self.shape(b)));
        }
        let p = self.mul(a, b)?;
        Ok(self.sum(p))
    }

    /// One direction of an LSTM over the first `steps` rows.
    ///
    /// `x_proj` is `[len×4H]` holding the input projection plus bias for each
    /// position (gate blocks in order input, forget, candidate, output);
    /// `w_hh` is the `[H×4H]` recurrent matrix. Rows at or beyond `steps` are
    /// zero in the `[len×H]` output. With `reverse` the recurrence runs from
    /// position `steps−1` down to 0.
    pub fn lstm(&mut self, x_proj: Var, w_hh: Var, steps: usize, reverse: bool) -> Result<Var> {
        let (xp, whh) = (self.value(x_proj), self.value(w_hh));
        if whh.rank() != 2 || whh.shape()[1] != 4 * whh.shape()[0] {
            return Err(Error::Contract(format!("lstm recurrent matrix must be H×4H, got {:?}", whh.shape())));
        }
        let h = whh.shape()[0];
        if xp.rank() != 2 || xp.shape()[1] != 4 * h {
            return Err(Error::dim("lstm", xp.shape(), whh.shape()));
        }
        let len = xp.shape()[0];
        if steps > len {
            return Err(Error::Contract(format!("lstm: {steps} steps exceed sequence length {len}")));
        }
        let (out, cache) = lstm_forward(xp, whh, steps, reverse);
        Ok(self.push(
            out,
            Op::Lstm {
                x_proj,
                w_hh,
                steps,
                reverse,
                cache,
            },
        ))
    }
}

pub(crate) fn sigmoid<T: Real>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

fn broadcast_shape(op: &'static str, a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if long[long.len() - short.len()..] != *short {
        return Err(Error::dim(op, a, b));
    }
    Ok(long.to_vec())
}

pub(crate) fn matmul_values<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0] {
        return Err(Error::dim("matmul", a.shape(), b.shape()));
    }
    let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aik = ad[i * k + p];
            let brow = &bd[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o = *o + aik * bv;
            }
        }
    }
    Tensor::new(vec![m, n], out)
}

pub(crate) fn transpose_values<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let (r, c) = (x.shape()[0], x.shape()[1]);
    let d = x.data();
    Tensor::from_fn(&[c, r], |i| d[(i % r) * c + i / r])
}

/// Splits a shape around `axis` into (outer, axis extent, inner).
pub(crate) fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

pub(crate) fn softmax_values<T: Real>(x: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
    if axis >= x.rank() {
        return Err(Error::Contract(format!("softmax axis {axis} out of range for {:?}", x.shape())));
    }
    let (outer, n, inner) = axis_split(x.shape(), axis);
    let d = x.data();
    let mut out = vec![T::zero(); d.len()];
    let mut exps = Vec::with_capacity(n);
    for o in 0..outer {
        for i in 0..inner {
            let at = |j: usize| o * n * inner + j * inner + i;
            let max = (0..n).map(|j| d[at(j)]).fold(T::neg_infinity(), T::max);
            if max == T::neg_infinity() {
                return Err(Error::DegenerateAttention);
            }
            exps.clear();
            exps.extend((0..n).map(|j| (d[at(j)] - max).exp()));
            // Summed in sorted order so the normaliser does not depend on the
            // order of the entries (candidate permutations stay bit-exact).
            let mut sorted = exps.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite exponentials"));
            let total: T = sorted.into_iter().sum();
            for (j, &e) in exps.iter().enumerate() {
                out[at(j)] = e / total;
            }
        }
    }
    Tensor::new(x.shape().to_vec(), out)
}

pub(crate) fn conv_rows_values<T: Real>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if x.rank() != 3 || w.rank() != 4 || w.shape()[1] != x.shape()[0] || w.shape()[2] != 1 {
        return Err(Error::dim("conv_rows", x.shape(), w.shape()));
    }
    let (f, k) = (w.shape()[0], w.shape()[3]);
    if b.shape() != [f] {
        return Err(Error::dim("conv_rows(bias)", w.shape(), b.shape()));
    }
    let (ch, rows, cols) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    if cols < k {
        return Err(Error::InputTooShort {
            op: "conv_rows",
            len: cols,
            kernel: k,
        });
    }
    let oc = cols - k + 1;
    let (xd, wd, bd) = (x.data(), w.data(), b.data());
    let mut out = vec![T::zero(); f * rows * oc];
    for fi in 0..f {
        for r in 0..rows {
            for j in 0..oc {
                let mut acc = bd[fi];
                for c in 0..ch {
                    let xrow = &xd[(c * rows + r) * cols + j..(c * rows + r) * cols + j + k];
                    let wrow = &wd[(fi * ch + c) * k..(fi * ch + c + 1) * k];
                    for (&xv, &wv) in xrow.iter().zip(wrow) {
                        acc = acc + xv * wv;
                    }
                }
                out[(fi * rows + r) * oc + j] = acc;
            }
        }
    }
    Tensor::new(vec![f, rows, oc], out)
}

fn nonzero_min(margin: f64, d: f64) -> f64 {
    if d == 0.0 {
        margin
    } else {
        margin.min(d)
    }
}

pub(crate) fn max_pool_rows_values<T: Real>(x: &Tensor<T>, width: usize) -> Result<(Tensor<T>, Vec<usize>)> {
    if width == 0 {
        return Err(Error::Contract("max_pool_rows width must be positive".into()));
    }
    let cols = *x.shape().last().expect("rank ≥ 1");
    if width > cols {
        return Err(Error::EmptyOutput { width, cols });
    }
    let lines = x.numel() / cols;
    let oc = cols / width;
    let d = x.data();
    let mut out = Vec::with_capacity(lines * oc);
    let mut argmax = Vec::with_capacity(lines * oc);
    for l in 0..lines {
        for j in 0..oc {
            let start = l * cols + j * width;
            let mut best = start;
            for i in start + 1..start + width {
                if d[i] > d[best] {
                    best = i;
                }
            }
            out.push(d[best]);
            argmax.push(best);
        }
    }
    let mut shape = x.shape().to_vec();
    *shape.last_mut().unwrap() = oc;
    Ok((Tensor::new(shape, out)?, argmax))
}

/// Processing order of sequence positions for one LSTM direction.
pub(crate) fn lstm_order(steps: usize, reverse: bool) -> Vec<usize> {
    if reverse {
        (0..steps).rev().collect()
    } else {
        (0..steps).collect()
    }
}

fn lstm_forward<T: Real>(xp: &Tensor<T>, whh: &Tensor<T>, steps: usize, reverse: bool) -> (Tensor<T>, LstmCache<T>) {
    let len = xp.shape()[0];
    let h = whh.shape()[0];
    let g4 = 4 * h;
    let mut out = vec![T::zero(); len * h];
    let mut gates = vec![T::zero(); len * g4];
    let mut cells = vec![T::zero(); len * h];
    let mut tanh_cells = vec![T::zero(); len * h];
    let mut h_prev = vec![T::zero(); h];
    let mut c_prev = vec![T::zero(); h];
    let wd = whh.data();
    let mut z = vec![T::zero(); g4];
    for t in lstm_order(steps, reverse) {
        z.copy_from_slice(xp.row(t));
        for (k, &hk) in h_prev.iter().enumerate() {
            if hk != T::zero() {
                for (zj, &w) in z.iter_mut().zip(&wd[k * g4..(k + 1) * g4]) {
                    *zj = *zj + hk * w;
                }
            }
        }
        let g = &mut gates[t * g4..(t + 1) * g4];
        for j in 0..h {
            let i_g = sigmoid(z[j]);
            let f_g = sigmoid(z[h + j]);
            let c_g = z[2 * h + j].tanh();
            let o_g = sigmoid(z[3 * h + j]);
            g[j] = i_g;
            g[h + j] = f_g;
            g[2 * h + j] = c_g;
            g[3 * h + j] = o_g;
            let c = f_g * c_prev[j] + i_g * c_g;
            let tc = c.tanh();
            cells[t * h + j] = c;
            tanh_cells[t * h + j] = tc;
            out[t * h + j] = o_g * tc;
        }
        h_prev.copy_from_slice(&out[t * h..(t + 1) * h]);
        c_prev.copy_from_slice(&cells[t * h..(t + 1) * h]);
    }
    (
        Tensor { shape: vec![len, h], data: out },
        LstmCache {
            gates,
            cells,
            tanh_cells,
        },
    )
}
