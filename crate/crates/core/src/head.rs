//! Attention cube, convolutional summarization and candidate scoring.

use rand_chacha::ChaCha8Rng;

use crate::config::{ModelConfig, KERNELS};
use crate::error::{Error, Result};
use crate::init;
use crate::tensor::{Graph, ParamId, ParamStore, Real, Tensor, Var};

/// Matching matrices `X · Yᵀ` for every question-side `Y` (outer loop) and
/// candidate-side `X` (inner loop). With candidate side `(R_CQ, R_CP, H_C)`
/// and question side `(R_selfQ, R_QP)` this is `M11, M12, M13, M21, M22, M23`.
pub fn build_cube<T: Real>(g: &mut Graph<'_, T>, candidate_side: &[Var], question_side: &[Var]) -> Result<Vec<Var>> {
    let mut channels = Vec::with_capacity(candidate_side.len() * question_side.len());
    for &q in question_side {
        let qt = g.transpose(q)?;
        for &c in candidate_side {
            channels.push(g.matmul(c, qt)?);
        }
    }
    Ok(channels)
}

/// Stacks `[C×Q]` channels into a `[K×C×Q]` cube.
pub fn stack_channels<T: Real>(g: &mut Graph<'_, T>, channels: &[Var]) -> Result<Var> {
    let mut parts = Vec::with_capacity(channels.len());
    for &c in channels {
        let s = g.shape(c).to_vec();
        if s.len() != 2 {
            return Err(Error::Contract(format!("cube channel must be a matrix, got {s:?}")));
        }
        parts.push(g.reshape(c, &[1, s[0], s[1]])?);
    }
    g.concat(&parts, 0)
}

/// Softmax over per-candidate scalar scores.
pub fn candidate_distribution<T: Real>(g: &mut Graph<'_, T>, scores: &[Var]) -> Result<Var> {
    if scores.len() < 2 {
        return Err(Error::Contract(format!("{} candidate score(s); need at least two", scores.len())));
    }
    let mut parts = Vec::with_capacity(scores.len());
    for &s in scores {
        parts.push(g.reshape(s, &[1])?);
    }
    let s = g.concat(&parts, 0)?;
    g.softmax(s, 0)
}

#[derive(Debug, Clone)]
pub struct ConvBank {
    /// `[F×K×1×k]`.
    pub filters: ParamId,
    pub bias: ParamId,
    pub kernel: usize,
    pub pool: usize,
}

#[derive(Debug, Clone)]
pub struct ConvHead {
    pub banks: Vec<ConvBank>,
    /// Scoring vector over the flattened `[O1; O2; O3]`.
    pub w: ParamId,
    relu: bool,
}

impl ConvHead {
    /// Feature vectors `O_k = flatten(pool_k(act(conv_k(cube))))`, flattened
    /// in (filter, candidate row, pooled column) order.
    pub fn summarize<T: Real>(&self, g: &mut Graph<'_, T>, cube: Var) -> Result<Vec<Var>> {
        let mut out = Vec::with_capacity(self.banks.len());
        for bank in &self.banks {
            let (f, b) = (g.param(bank.filters), g.param(bank.bias));
            let mut y = g.conv_rows(cube, f, b)?;
            if self.relu {
                y = g.relu(y);
            }
            let y = g.max_pool_rows(y, bank.pool)?;
            out.push(g.flatten(y)?);
        }
        Ok(out)
    }

    pub fn score<T: Real>(&self, g: &mut Graph<'_, T>, cube: Var) -> Result<Var> {
        let feats = self.summarize(g, cube)?;
        let o = g.concat(&feats, 0)?;
        let w = g.param(self.w);
        g.dot(o, w)
    }
}

/// Two fully connected layers squeezing one matching matrix to a scalar.
#[derive(Debug, Clone)]
pub struct FcChannel {
    /// `[Q×1]`, shared over candidate rows.
    pub fc1_w: ParamId,
    pub fc1_b: ParamId,
    /// `[C]`.
    pub fc2_w: ParamId,
    pub fc2_b: ParamId,
}

impl FcChannel {
    pub fn param_count(question_len: usize, candidate_len: usize) -> usize {
        question_len + 1 + candidate_len + 1
    }

    fn score<T: Real>(&self, g: &mut Graph<'_, T>, m: Var) -> Result<Var> {
        let (w1, b1, w2, b2) = (g.param(self.fc1_w), g.param(self.fc1_b), g.param(self.fc2_w), g.param(self.fc2_b));
        let rows = g.matmul(m, w1)?;
        let rows = g.add(rows, b1)?;
        let rows = g.flatten(rows)?;
        let s = g.dot(rows, w2)?;
        let s = g.reshape(s, &[1])?;
        let s = g.add(s, b2)?;
        g.reshape(s, &[])
    }
}

#[derive(Debug, Clone)]
pub enum Head {
    Conv(ConvHead),
    Fc(Vec<FcChannel>),
}

impl Head {
    pub fn new<T: Real>(store: &mut ParamStore<T>, config: &ModelConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let k_in = config.cube_channels();
        let (c, q) = (config.candidate_len, config.question_len);
        if config.ablations.no_csa {
            let channels = (0..k_in)
                .map(|i| FcChannel {
                    fc1_w: store.add(format!("head.fc.{i}.fc1_w"), init::fan_in(rng, &[q, 1], q), true),
                    fc1_b: store.add(format!("head.fc.{i}.fc1_b"), Tensor::zeros(&[1]), true),
                    fc2_w: store.add(format!("head.fc.{i}.fc2_w"), init::fan_in(rng, &[c], c), true),
                    fc2_b: store.add(format!("head.fc.{i}.fc2_b"), Tensor::zeros(&[1]), true),
                })
                .collect();
            return Ok(Head::Fc(channels));
        }
        let f = config.filters;
        let banks = KERNELS
            .iter()
            .map(|&(k, pool)| ConvBank {
                filters: store.add(format!("head.conv{k}.filters"), init::fan_in(rng, &[f, k_in, 1, k], k_in * k), true),
                bias: store.add(format!("head.conv{k}.bias"), init::fan_in(rng, &[f], k_in * k), true),
                kernel: k,
                pool,
            })
            .collect();
        let n = config.feature_len();
        let w = store.add("head.w", init::fan_in(rng, &[n], n), true);
        Ok(Head::Conv(ConvHead {
            banks,
            w,
            relu: config.conv_relu,
        }))
    }

    /// Scalar score of one candidate from its matching matrices.
    pub fn score<T: Real>(&self, g: &mut Graph<'_, T>, channels: &[Var]) -> Result<Var> {
        match self {
            Head::Conv(h) => {
                let cube = stack_channels(g, channels)?;
                h.score(g, cube)
            }
            Head::Fc(fc) => {
                if fc.len() != channels.len() {
                    return Err(Error::dim("fc head", &[fc.len()], &[channels.len()]));
                }
                let mut total: Option<Var> = None;
                for (p, &m) in fc.iter().zip(channels) {
                    let s = p.score(g, m)?;
                    total = Some(match total {
                        None => s,
                        Some(t) => g.add(t, s)?,
                    });
                }
                total.ok_or_else(|| Error::Contract("fc head without channels".into()))
            }
        }
    }
}
