//! Word representation: embedding concatenation, the shared highway
//! transform, and per-instance stream encoding.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::config::ModelConfig;
use crate::corpus::{FeatureAnnotation, InstanceFeatures, McqInstance, PosTag, QuestionType, Vocabulary};
use crate::error::{Error, Result};
use crate::init;
use crate::tensor::{Graph, ParamId, ParamStore, Real, Tensor, Var};

/// Model-ready form of one token stream, padded to its configured maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamInput<T> {
    /// Vocabulary ids; `None` at padding positions.
    pub tokens: Vec<Option<usize>>,
    pub pos: Vec<Option<usize>>,
    /// `[len×2]`: exact and fuzzy match bits, zero at padding.
    pub features: Tensor<T>,
    /// `[len×es]` contextual vectors, zero at padding.
    pub contextual: Option<Tensor<T>>,
    /// True at real token positions (always a prefix).
    pub mask: Vec<bool>,
}

impl<T: Real> StreamInput<T> {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn valid(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    fn build(
        tokens: &[String],
        feats: &FeatureAnnotation,
        max_len: usize,
        vocab: &Vocabulary,
        contextual: Option<&Tensor<T>>,
    ) -> Result<Self> {
        let n = tokens.len().min(max_len);
        if feats.len() < n {
            return Err(Error::Contract(format!(
                "{} feature positions for {} tokens",
                feats.len(),
                tokens.len()
            )));
        }
        let mut features = Tensor::zeros(&[max_len, 2]);
        for i in 0..n {
            let d = features.data_mut();
            d[2 * i] = if feats.exact[i] { T::one() } else { T::zero() };
            d[2 * i + 1] = if feats.fuzzy[i] { T::one() } else { T::zero() };
        }
        let contextual = match contextual {
            None => None,
            Some(c) => {
                let es = c.shape()[1];
                let mut t = Tensor::zeros(&[max_len, es]);
                t.data_mut()[..n * es].copy_from_slice(&c.data()[..n * es]);
                Some(t)
            }
        };
        Ok(StreamInput {
            tokens: (0..max_len).map(|i| (i < n).then(|| vocab.id(&tokens[i]))).collect(),
            pos: (0..max_len).map(|i| (i < n).then(|| feats.pos[i].id())).collect(),
            features,
            contextual,
            mask: (0..max_len).map(|i| i < n).collect(),
        })
    }
}

/// Everything the network consumes for one question.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedInstance<T> {
    pub id: String,
    pub passage: StreamInput<T>,
    pub question: StreamInput<T>,
    pub candidates: Vec<StreamInput<T>>,
    pub answer: usize,
    pub qtype: QuestionType,
}

impl<T: Real> EncodedInstance<T> {
    pub fn new(
        inst: &McqInstance,
        feats: &InstanceFeatures,
        vocab: &Vocabulary,
        config: &ModelConfig,
        contextual: Option<&ContextualStore<T>>,
    ) -> Result<Self> {
        let es = config.contextual_dim;
        let ctx = |stream: String, len: usize| -> Result<Option<&Tensor<T>>> {
            if es == 0 {
                return Ok(None);
            }
            let missing = || Error::MissingContextual {
                id: inst.id.clone(),
                stream: stream.clone(),
            };
            let t = contextual.and_then(|c| c.get(&inst.id, &stream)).ok_or_else(missing)?;
            if t.shape()[1] != es || t.shape()[0] < len {
                return Err(Error::Config(format!(
                    "instance {}: contextual vectors for `{stream}` are {:?}, need at least [{len}×{es}]",
                    inst.id,
                    t.shape()
                )));
            }
            Ok(Some(t))
        };
        let p_len = inst.passage.len().min(config.passage_len);
        let q_len = inst.question.len().min(config.question_len);
        let passage = StreamInput::build(
            &inst.passage,
            &feats.passage,
            config.passage_len,
            vocab,
            ctx("passage".into(), p_len)?,
        )?;
        let question = StreamInput::build(
            &inst.question,
            &feats.question,
            config.question_len,
            vocab,
            ctx("question".into(), q_len)?,
        )?;
        let mut candidates = Vec::with_capacity(inst.candidates.len());
        for (i, (c, f)) in inst.candidates.iter().zip(&feats.candidates).enumerate() {
            let c_len = c.len().min(config.candidate_len);
            let v = ctx(candidate_stream(i), c_len)?;
            candidates.push(StreamInput::build(c, f, config.candidate_len, vocab, v)?);
        }
        if candidates.len() != inst.candidates.len() {
            return Err(Error::Contract(format!(
                "instance {}: features for {} of {} candidates",
                inst.id,
                candidates.len(),
                inst.candidates.len()
            )));
        }
        Ok(EncodedInstance {
            id: inst.id.clone(),
            passage,
            question,
            candidates,
            answer: inst.answer,
            qtype: inst.qtype,
        })
    }

    pub fn num_candidates(&self) -> usize {
        self.candidates.len()
    }
}

/// Stream key used in contextual-vector files for candidate `i`.
pub fn candidate_stream(i: usize) -> String {
    format!("candidate:{i}")
}

/// Precomputed contextual vectors keyed by instance id and stream
/// (`passage`, `question`, `candidate:{i}`).
#[derive(Debug, Clone, Default)]
pub struct ContextualStore<T> {
    dim: Option<usize>,
    blocks: HashMap<(String, String), Tensor<T>>,
}

#[derive(Deserialize)]
struct ContextualRecord {
    id: String,
    stream: String,
    vectors: Vec<Vec<f64>>,
}

impl<T: Real> ContextualStore<T> {
    pub fn new() -> Self {
        ContextualStore {
            dim: None,
            blocks: HashMap::new(),
        }
    }

    /// Reads jsonl records `{id, stream, vectors: [[…]; len]}`.
    pub fn load(path: &Path) -> Result<Self> {
        let reader = BufReader::new(fs::File::open(path)?);
        let mut store = ContextualStore::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let format_err = |msg: String| Error::Format {
                path: path.to_path_buf(),
                line: i + 1,
                msg,
            };
            let rec: ContextualRecord = serde_json::from_str(&line).map_err(|e| format_err(e.to_string()))?;
            let rows = rec.vectors.len();
            let width = rec.vectors.first().map_or(0, Vec::len);
            if rows == 0 || width == 0 || rec.vectors.iter().any(|r| r.len() != width) {
                return Err(format_err("vectors must be a non-empty rectangular array".into()));
            }
            let data = rec.vectors.into_iter().flatten().map(T::lit).collect();
            store
                .insert(rec.id, rec.stream, Tensor::new(vec![rows, width], data)?)
                .map_err(|e| format_err(e.to_string()))?;
        }
        Ok(store)
    }

    pub fn insert(&mut self, id: impl Into<String>, stream: impl Into<String>, vectors: Tensor<T>) -> Result<()> {
        if vectors.rank() != 2 {
            return Err(Error::Contract(format!("contextual block must be a matrix, got {:?}", vectors.shape())));
        }
        let w = vectors.shape()[1];
        match self.dim {
            Some(d) if d != w => return Err(Error::dim("contextual", &[d], &[w])),
            _ => self.dim = Some(w),
        }
        self.blocks.insert((id.into(), stream.into()), vectors);
        Ok(())
    }

    pub fn get(&self, id: &str, stream: &str) -> Option<&Tensor<T>> {
        self.blocks.get(&(id.to_string(), stream.to_string()))
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct HighwayParams {
    pub w_t: ParamId,
    pub b_t: ParamId,
    pub w_h: ParamId,
    pub b_h: ParamId,
}

/// Embedding tables plus the highway transform shared by all streams.
#[derive(Debug, Clone)]
pub struct Embedder {
    pub word_table: ParamId,
    pub pos_table: ParamId,
    /// One entry when the two layers share weights, two when untied.
    pub highway: Vec<HighwayParams>,
    width: usize,
}

impl Embedder {
    /// Registers parameters. The word table is stored frozen.
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        config: &ModelConfig,
        word_table: Tensor<T>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if word_table.rank() != 2 || word_table.shape()[1] != config.word_dim {
            return Err(Error::dim("word table", word_table.shape(), &[0, config.word_dim]));
        }
        let word_table = store.add("embed.word", word_table, false);
        let pos_table = store.add(
            "embed.pos",
            init::uniform(rng, &[PosTag::COUNT, config.pos_dim], 0.05),
            true,
        );
        let e = config.embedding_width();
        let layers = if config.untie_highway { 2 } else { 1 };
        let highway = (0..layers)
            .map(|l| {
                let p = if config.untie_highway {
                    format!("highway.{l}")
                } else {
                    "highway".to_string()
                };
                HighwayParams {
                    w_t: store.add(format!("{p}.w_t"), init::fan_in(rng, &[e, e], e), true),
                    b_t: store.add(format!("{p}.b_t"), Tensor::zeros(&[e]), true),
                    w_h: store.add(format!("{p}.w_h"), init::fan_in(rng, &[e, e], e), true),
                    b_h: store.add(format!("{p}.b_h"), Tensor::zeros(&[e]), true),
                }
            })
            .collect();
        Ok(Embedder {
            word_table,
            pos_table,
            highway,
            width: e,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Per-position `[word; contextual; pos; match; fuzzy]`, zero at padding.
    pub fn embed<T: Real>(&self, g: &mut Graph<'_, T>, stream: &StreamInput<T>) -> Result<Var> {
        let table = g.param(self.word_table);
        let word = g.gather_rows(table, &stream.tokens)?;
        let pos_table = g.param(self.pos_table);
        let pos = g.gather_rows(pos_table, &stream.pos)?;
        let feats = g.constant(stream.features.clone());
        let mut parts = vec![word];
        if let Some(c) = &stream.contextual {
            parts.push(g.constant(c.clone()));
        }
        parts.extend([pos, feats]);
        let out = g.concat(&parts, 1)?;
        if g.shape(out)[1] != self.width {
            return Err(Error::dim("embed", g.shape(out), &[stream.len(), self.width]));
        }
        Ok(out)
    }

    /// Two highway layers `y = t ⊙ relu(xW_h + b_h) + (1 − t) ⊙ x` with
    /// `t = σ(xW_t + b_t)`, followed by tanh.
    pub fn highway2<T: Real>(&self, g: &mut Graph<'_, T>, x: Var) -> Result<Var> {
        if g.shape(x).len() != 2 || g.shape(x)[1] != self.width {
            return Err(Error::dim("highway", g.shape(x), &[self.width]));
        }
        let mut y = x;
        for layer in 0..2 {
            let p = &self.highway[layer.min(self.highway.len() - 1)];
            let (w_t, b_t, w_h, b_h) = (g.param(p.w_t), g.param(p.b_t), g.param(p.w_h), g.param(p.b_h));
            let t = g.matmul(y, w_t)?;
            let t = g.add(t, b_t)?;
            let t = g.sigmoid(t);
            let h = g.matmul(y, w_h)?;
            let h = g.add(h, b_h)?;
            let h = g.relu(h);
            // y + t ⊙ (h − y)
            let d = g.sub(h, y)?;
            let d = g.mul(t, d)?;
            y = g.add(y, d)?;
        }
        Ok(g.tanh(y))
    }

    /// `highway2(embed(stream))`.
    pub fn represent<T: Real>(&self, g: &mut Graph<'_, T>, stream: &StreamInput<T>) -> Result<Var> {
        let e = self.embed(g, stream)?;
        self.highway2(g, e)
    }
}
