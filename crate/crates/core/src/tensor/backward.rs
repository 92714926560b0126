use super::graph::{axis_split, lstm_order, matmul_values, transpose_values, Graph, Op};
use super::{ParamGrads, Real, Tensor, Var};
use crate::error::{Error, Result};

#[cfg(test)]
thread_local! {
    /// Test hook: when set, the named op's input gradients are scaled by 1.5.
    pub(crate) static CORRUPT_OP: std::cell::Cell<Option<&'static str>> = const { std::cell::Cell::new(None) };
}

/// Gradients of a scalar with respect to every node of a graph.
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
    params: ParamGrads<T>,
}

impl<T: Real> Gradients<T> {
    /// Gradient with respect to `v`, if it was reached.
    pub fn wrt(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn param_grads(&self) -> &ParamGrads<T> {
        &self.params
    }

    pub fn into_param_grads(self) -> ParamGrads<T> {
        self.params
    }
}

impl<T: Real> Graph<'_, T> {
    /// Reverse-mode sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.value(loss).numel() != 1 {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.shape(loss), T::one()));
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let contributions = self.input_grads(Var(i), &g)?;
            #[cfg(test)]
            let contributions = {
                let scale = if CORRUPT_OP.with(|c| c.get()) == Some(node.op.name()) {
                    T::lit(1.5)
                } else {
                    T::one()
                };
                contributions
                    .into_iter()
                    .map(|(v, t)| (v, t.map(|x| x * scale)))
                    .collect::<Vec<_>>()
            };
            for (v, dv) in contributions {
                if !self.nodes[v.0].requires_grad {
                    continue;
                }
                match &mut grads[v.0] {
                    Some(acc) => acc.add_assign(&dv),
                    slot @ None => *slot = Some(dv),
                }
            }
            grads[i] = Some(g);
        }
        let mut params = ParamGrads::empty(self.params.len());
        for (i, node) in self.nodes.iter().enumerate() {
            if let (Some(id), Some(g)) = (node.param, &grads[i]) {
                params.accumulate(id, g);
            }
        }
        Ok(Gradients { grads, params })
    }

    /// Vector-Jacobian products for the inputs of node `out`.
    fn input_grads(&self, out: Var, g: &Tensor<T>) -> Result<Vec<(Var, Tensor<T>)>> {
        let y = self.value(out);
        let needs = |v: &Var| self.nodes[v.0].requires_grad;
        let res = match &self.nodes[out.0].op {
            Op::Leaf => vec![],
            Op::MatMul(a, b) => {
                let mut r = Vec::new();
                if needs(a) {
                    let bt = transpose_values(self.value(*b));
                    r.push((*a, matmul_values(g, &bt)?));
                }
                if needs(b) {
                    let at = transpose_values(self.value(*a));
                    r.push((*b, matmul_values(&at, g)?));
                }
                r
            }
            Op::Transpose(x) => vec![(*x, transpose_values(g))],
            Op::Add(a, b) => vec![
                (*a, reduce_to(g, self.shape(*a))),
                (*b, reduce_to(g, self.shape(*b))),
            ],
            Op::Sub(a, b) => vec![
                (*a, reduce_to(g, self.shape(*a))),
                (*b, reduce_to(&g.map(|v| -v), self.shape(*b))),
            ],
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let mut r = Vec::new();
                if needs(a) {
                    r.push((*a, reduce_to(&broadcast_product(g, bv), av.shape())));
                }
                if needs(b) {
                    r.push((*b, reduce_to(&broadcast_product(g, av), bv.shape())));
                }
                r
            }
            Op::Scale(x, c) => vec![(*x, g.map(|v| v * *c))],
            Op::Relu(x) => {
                let xv = self.value(*x);
                vec![(*x, zip_map(g, xv, |gv, xv| if xv > T::zero() { gv } else { T::zero() }))]
            }
            Op::Tanh(x) => vec![(*x, zip_map(g, y, |gv, yv| gv * (T::one() - yv * yv)))],
            Op::Sigmoid(x) => vec![(*x, zip_map(g, y, |gv, yv| gv * yv * (T::one() - yv)))],
            Op::Log(x) => vec![(*x, zip_map(g, self.value(*x), |gv, xv| gv / xv))],
            Op::ClampMin(x, floor) => {
                let floor = *floor;
                vec![(*x, zip_map(g, self.value(*x), |gv, xv| if xv < floor { T::zero() } else { gv }))]
            }
            Op::Softmax { x, axis } => {
                let (outer, n, inner) = axis_split(y.shape(), *axis);
                let (yd, gd) = (y.data(), g.data());
                let mut dx = vec![T::zero(); yd.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |j: usize| o * n * inner + j * inner + i;
                        let dot: T = (0..n).map(|j| gd[at(j)] * yd[at(j)]).sum();
                        for j in 0..n {
                            dx[at(j)] = yd[at(j)] * (gd[at(j)] - dot);
                        }
                    }
                }
                vec![(*x, Tensor::new(y.shape().to_vec(), dx)?)]
            }
            Op::MaskLastAxis { x, keep } => {
                let n = keep.len();
                let data = g
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| if keep[i % n] { v } else { T::zero() })
                    .collect();
                vec![(*x, Tensor::new(g.shape().to_vec(), data)?)]
            }
            Op::Concat { inputs, axis } => {
                let outer: usize = y.shape()[..*axis].iter().product();
                let total = g.numel() / outer;
                let mut offset = 0;
                let mut r = Vec::with_capacity(inputs.len());
                for v in inputs {
                    let shape = self.shape(*v).to_vec();
                    let chunk = shape.iter().product::<usize>() / outer;
                    let mut data = Vec::with_capacity(chunk * outer);
                    for o in 0..outer {
                        let start = o * total + offset;
                        data.extend_from_slice(&g.data()[start..start + chunk]);
                    }
                    offset += chunk;
                    r.push((*v, Tensor::new(shape, data)?));
                }
                r
            }
            Op::Reshape(x) => vec![(*x, g.clone().reshape(self.shape(*x))?)],
            Op::Gather { table, rows } => {
                let tshape = self.shape(*table).to_vec();
                let d = tshape[1];
                let mut dt = Tensor::zeros(&tshape);
                let dd = dt.data_mut();
                for (r, idx) in rows.iter().enumerate() {
                    if let Some(i) = *idx {
                        for (acc, &gv) in dd[i * d..(i + 1) * d].iter_mut().zip(&g.data()[r * d..(r + 1) * d]) {
                            *acc = *acc + gv;
                        }
                    }
                }
                vec![(*table, dt)]
            }
            Op::Dropout { x, scale } => {
                let data = g.data().iter().zip(scale).map(|(&a, &s)| a * s).collect();
                vec![(*x, Tensor::new(g.shape().to_vec(), data)?)]
            }
            Op::ConvRows { x, filters, bias } => self.conv_rows_grads(*x, *filters, *bias, g)?,
            Op::MaxPoolRows { x, argmax, .. } => {
                let mut dx = Tensor::zeros(self.shape(*x));
                let dd = dx.data_mut();
                for (&src, &gv) in argmax.iter().zip(g.data()) {
                    dd[src] = dd[src] + gv;
                }
                vec![(*x, dx)]
            }
            Op::Sum(x) => vec![(*x, Tensor::full(self.shape(*x), g.data()[0]))],
            Op::Index { x, index } => {
                let mut dx = Tensor::zeros(self.shape(*x));
                dx.data_mut()[*index] = g.data()[0];
                vec![(*x, dx)]
            }
            Op::Lstm {
                x_proj,
                w_hh,
                steps,
                reverse,
                cache,
            } => {
                let whh = self.value(*w_hh);
                let h = whh.shape()[0];
                let g4 = 4 * h;
                let len = y.shape()[0];
                let wd = whh.data();
                let mut dxp = vec![T::zero(); len * g4];
                let mut dw = vec![T::zero(); h * g4];
                let mut dh_next = vec![T::zero(); h];
                let mut dc_next = vec![T::zero(); h];
                let order = lstm_order(*steps, *reverse);
                for (s, &t) in order.iter().enumerate().rev() {
                    let prev = if s == 0 { None } else { Some(order[s - 1]) };
                    let gates = &cache.gates[t * g4..(t + 1) * g4];
                    let dz = &mut dxp[t * g4..(t + 1) * g4];
                    for j in 0..h {
                        let (ig, fg, cg, og) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                        let tc = cache.tanh_cells[t * h + j];
                        let c_prev = prev.map_or(T::zero(), |p| cache.cells[p * h + j]);
                        let dh = g.data()[t * h + j] + dh_next[j];
                        let d_o = dh * tc;
                        let dc = dh * og * (T::one() - tc * tc) + dc_next[j];
                        dc_next[j] = dc * fg;
                        dz[j] = dc * cg * ig * (T::one() - ig);
                        dz[h + j] = dc * c_prev * fg * (T::one() - fg);
                        dz[2 * h + j] = dc * ig * (T::one() - cg * cg);
                        dz[3 * h + j] = d_o * og * (T::one() - og);
                    }
                    // dh_prev = dz · W_hhᵀ ; dW_hh += h_prevᵀ · dz
                    for k in 0..h {
                        let wrow = &wd[k * g4..(k + 1) * g4];
                        dh_next[k] = wrow.iter().zip(dz.iter()).map(|(&w, &d)| w * d).sum();
                    }
                    if let Some(p) = prev {
                        let h_prev = &y.data()[p * h..(p + 1) * h];
                        for (k, &hk) in h_prev.iter().enumerate() {
                            for (acc, &d) in dw[k * g4..(k + 1) * g4].iter_mut().zip(dz.iter()) {
                                *acc = *acc + hk * d;
                            }
                        }
                    }
                }
                vec![
                    (*x_proj, Tensor::new(vec![len, g4], dxp)?),
                    (*w_hh, Tensor::new(vec![h, g4], dw)?),
                ]
            }
        };
        Ok(res)
    }

    fn conv_rows_grads(&self, x: Var, filters: Var, bias: Var, g: &Tensor<T>) -> Result<Vec<(Var, Tensor<T>)>> {
        let (xv, wv) = (self.value(x), self.value(filters));
        let (ch, rows, cols) = (xv.shape()[0], xv.shape()[1], xv.shape()[2]);
        let (f, k) = (wv.shape()[0], wv.shape()[3]);
        let oc = cols - k + 1;
        let (xd, wd, gd) = (xv.data(), wv.data(), g.data());
        let mut dx = vec![T::zero(); xd.len()];
        let mut dw = vec![T::zero(); wd.len()];
        let mut db = vec![T::zero(); f];
        for fi in 0..f {
            for r in 0..rows {
                for j in 0..oc {
                    let gv = gd[(fi * rows + r) * oc + j];
                    if gv == T::zero() {
                        continue;
                    }
                    db[fi] = db[fi] + gv;
                    for c in 0..ch {
                        let xbase = (c * rows + r) * cols + j;
                        let wbase = (fi * ch + c) * k;
                        for u in 0..k {
                            dw[wbase + u] = dw[wbase + u] + gv * xd[xbase + u];
                            dx[xbase + u] = dx[xbase + u] + gv * wd[wbase + u];
                        }
                    }
                }
            }
        }
        Ok(vec![
            (x, Tensor::new(xv.shape().to_vec(), dx)?),
            (filters, Tensor::new(wv.shape().to_vec(), dw)?),
            (bias, Tensor::new(vec![f], db)?),
        ])
    }
}

fn zip_map<T: Real>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor {
        shape: a.shape().to_vec(),
        data,
    }
}

/// `g ⊙ other` where `other` may be a trailing-suffix broadcast of `g`.
fn broadcast_product<T: Real>(g: &Tensor<T>, other: &Tensor<T>) -> Tensor<T> {
    let n = other.numel();
    let data = g.data().iter().enumerate().map(|(i, &v)| v * other.data()[i % n]).collect();
    Tensor {
        shape: g.shape().to_vec(),
        data,
    }
}

/// Sums a broadcast gradient back down to `shape` (a trailing suffix).
fn reduce_to<T: Real>(g: &Tensor<T>, shape: &[usize]) -> Tensor<T> {
    if g.shape() == shape {
        return g.clone();
    }
    let n: usize = shape.iter().product();
    let mut data = vec![T::zero(); n];
    for (i, &v) in g.data().iter().enumerate() {
        data[i % n] = data[i % n] + v;
    }
    Tensor {
        shape: shape.to_vec(),
        data,
    }
}
