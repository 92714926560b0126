//! Bidirectional LSTM encoders.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::init;
use crate::tensor::{Graph, ParamId, ParamStore, Real, Tensor, Var};

/// Parameters of one direction. Gate blocks are ordered input, forget,
/// candidate, output along the `4·H` axis.
#[derive(Debug, Clone)]
pub struct LstmDirection {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub bias: ParamId,
}

#[derive(Debug, Clone)]
pub struct BiLstm {
    pub forward: LstmDirection,
    pub backward: LstmDirection,
    input: usize,
    hidden: usize,
}

/// Number of valid positions in a mask of the form `[true…, false…]`.
pub fn prefix_len(mask: &[bool]) -> Result<usize> {
    let n = mask.iter().take_while(|m| **m).count();
    if mask[n..].iter().any(|m| *m) {
        return Err(Error::Contract("mask must mark a prefix of real positions".into()));
    }
    Ok(n)
}

impl BiLstm {
    /// Registers a Bi-LSTM with input width `input` and total output width
    /// `hidden` (split evenly between directions).
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if hidden == 0 || hidden % 2 != 0 {
            return Err(Error::Config(format!("Bi-LSTM width {hidden} must be positive and even")));
        }
        let h = hidden / 2;
        let mut dir = |name: &str| {
            let mut bias = Tensor::zeros(&[4 * h]);
            bias.data_mut()[h..2 * h].fill(T::one());
            LstmDirection {
                w_ih: store.add(format!("{prefix}.{name}.w_ih"), init::fan_in(rng, &[input, 4 * h], input), true),
                w_hh: store.add(format!("{prefix}.{name}.w_hh"), init::fan_in(rng, &[h, 4 * h], h), true),
                bias: store.add(format!("{prefix}.{name}.bias"), bias, true),
            }
        };
        let forward = dir("fwd");
        let backward = dir("bwd");
        Ok(BiLstm {
            forward,
            backward,
            input,
            hidden,
        })
    }

    /// Scalar parameter count for the given widths.
    pub fn param_count(input: usize, hidden: usize) -> usize {
        let h = hidden / 2;
        2 * 4 * ((input + 1) * h + h * h)
    }

    pub fn output_width(&self) -> usize {
        self.hidden
    }

    /// Encodes `x` `[len×in]`; positions where `mask` is false output zeros.
    /// Applies input dropout with probability `dropout` in training mode.
    pub fn forward<T: Real>(&self, g: &mut Graph<'_, T>, x: Var, mask: &[bool], dropout: f64) -> Result<Var> {
        let shape = g.shape(x).to_vec();
        if shape.len() != 2 || shape[1] != self.input {
            return Err(Error::dim("bilstm", &shape, &[shape.first().copied().unwrap_or(0), self.input]));
        }
        if mask.len() != shape[0] {
            return Err(Error::dim("bilstm mask", &shape, &[mask.len()]));
        }
        let steps = prefix_len(mask)?;
        let x = g.dropout(x, dropout)?;
        let mut halves = Vec::with_capacity(2);
        for (dir, reverse) in [(&self.forward, false), (&self.backward, true)] {
            let w_ih = g.param(dir.w_ih);
            let bias = g.param(dir.bias);
            let w_hh = g.param(dir.w_hh);
            let proj = g.matmul(x, w_ih)?;
            let proj = g.add(proj, bias)?;
            halves.push(g.lstm(proj, w_hh, steps, reverse)?);
        }
        g.concat(&halves, 1)
    }
}
