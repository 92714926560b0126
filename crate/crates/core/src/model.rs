//! The full network: embedder, encoders, enrichment sites and head.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ModelConfig;
use crate::corpus::{annotate, ExternalTags, McqInstance, PosTagger, Vocabulary};
use crate::embedder::{ContextualStore, Embedder, EncodedInstance};
use crate::encoder::BiLstm;
use crate::enrichment::AttentionSite;
use crate::error::{Error, Result};
use crate::head::{build_cube, candidate_distribution, stack_channels, Head};
use crate::tensor::{Graph, Mode, ParamStore, Real, Tensor, Var};

/// Parameter handles of every component. Values live in a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Network {
    pub embedder: Embedder,
    pub passage_encoder: BiLstm,
    pub question_encoder: BiLstm,
    pub candidate_encoder: BiLstm,
    /// `g(H_C, H_Q)`; absent under `no_enriched_representation`.
    pub site_cq: Option<AttentionSite>,
    /// `g(H_C, H_P)`; absent under `no_enriched_representation`.
    pub site_cp: Option<AttentionSite>,
    /// `g(H_Q, H_P)`.
    pub site_qp: AttentionSite,
    /// `g(H_Q, R_QP)`.
    pub site_selfq: AttentionSite,
    pub head: Head,
}

/// Graph handles produced by one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// Distribution over candidates, `[N]`.
    pub probs: Var,
    pub scores: Vec<Var>,
    /// Matching matrices per candidate, in cube channel order.
    pub channels: Vec<Vec<Var>>,
    /// Every attention matrix computed, with the mask of its attended axis.
    pub attention: Vec<(Var, Vec<bool>)>,
}

impl Network {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        config: &ModelConfig,
        word_table: Tensor<T>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        config.validate()?;
        let (e, h, ha) = (config.embedding_width(), config.hidden, config.attention_hidden);
        let (p, q, c) = (config.passage_len, config.question_len, config.candidate_len);
        let weight = !config.ablations.no_attention_weight;
        let embedder = Embedder::new(store, config, word_table, rng)?;
        let passage_encoder = BiLstm::new(store, "enc.passage", e, h, rng)?;
        let question_encoder = BiLstm::new(store, "enc.question", e, h, rng)?;
        let candidate_encoder = BiLstm::new(store, "enc.candidate", e, h, rng)?;
        let (site_cq, site_cp) = if config.ablations.no_enriched_representation {
            (None, None)
        } else {
            (
                Some(AttentionSite::new(store, "att.cq", h, ha, c, q, weight, rng)?),
                Some(AttentionSite::new(store, "att.cp", h, ha, c, p, weight, rng)?),
            )
        };
        let site_qp = AttentionSite::new(store, "att.qp", h, ha, q, p, weight, rng)?;
        let site_selfq = AttentionSite::new(store, "att.selfq", h, ha, q, q, weight, rng)?;
        let head = Head::new(store, config, rng)?;
        Ok(Network {
            embedder,
            passage_encoder,
            question_encoder,
            candidate_encoder,
            site_cq,
            site_cp,
            site_qp,
            site_selfq,
            head,
        })
    }

    /// Attention sites in construction order.
    pub fn sites(&self) -> Vec<&AttentionSite> {
        [self.site_cq.as_ref(), self.site_cp.as_ref(), Some(&self.site_qp), Some(&self.site_selfq)]
            .into_iter()
            .flatten()
            .collect()
    }

    pub fn forward<T: Real>(
        &self,
        g: &mut Graph<'_, T>,
        config: &ModelConfig,
        inst: &EncodedInstance<T>,
    ) -> Result<ForwardOutput> {
        let drop = config.dropout;
        let (mp, mq) = (&inst.passage.mask, &inst.question.mask);
        let ep = self.embedder.represent(g, &inst.passage)?;
        let hp = self.passage_encoder.forward(g, ep, mp, drop)?;
        let eq = self.embedder.represent(g, &inst.question)?;
        let hq = self.question_encoder.forward(g, eq, mq, drop)?;

        let mut attention = Vec::new();
        let question_side = |g: &mut Graph<'_, T>, attention: &mut Vec<(Var, Vec<bool>)>| -> Result<[Var; 2]> {
            let qp = self.site_qp.enrich(g, hq, mq, hp, mp, drop)?;
            attention.push((qp.attention, mp.clone()));
            let selfq = self.site_selfq.enrich(g, hq, mq, qp.output, mq, drop)?;
            attention.push((selfq.attention, mq.clone()));
            Ok([selfq.output, qp.output])
        };
        let shared = if config.per_candidate_question_enrichment {
            None
        } else {
            Some(question_side(g, &mut attention)?)
        };

        let mut scores = Vec::with_capacity(inst.candidates.len());
        let mut channels = Vec::with_capacity(inst.candidates.len());
        for cand in &inst.candidates {
            let q_side = match shared {
                Some(s) => s,
                None => question_side(g, &mut attention)?,
            };
            let mc = &cand.mask;
            let ec = self.embedder.represent(g, cand)?;
            let hc = self.candidate_encoder.forward(g, ec, mc, drop)?;
            let c_side = match (&self.site_cq, &self.site_cp) {
                (Some(cq), Some(cp)) => {
                    let r_cq = cq.enrich(g, hc, mc, hq, mq, drop)?;
                    let r_cp = cp.enrich(g, hc, mc, hp, mp, drop)?;
                    attention.push((r_cq.attention, mq.clone()));
                    attention.push((r_cp.attention, mp.clone()));
                    vec![r_cq.output, r_cp.output, hc]
                }
                _ => vec![hc],
            };
            let ch = build_cube(g, &c_side, &q_side)?;
            scores.push(self.head.score(g, &ch)?);
            channels.push(ch);
        }
        let probs = candidate_distribution(g, &scores)?;
        Ok(ForwardOutput {
            probs,
            scores,
            channels,
            attention,
        })
    }
}

/// A network together with its parameter values, configuration and
/// vocabulary.
#[derive(Debug, Clone)]
pub struct CsaModel<T> {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub params: ParamStore<T>,
    pub net: Network,
}

impl<T: Real> CsaModel<T> {
    /// Builds a model with seeded initialization. `word_table` must be
    /// `[|V|×word_dim]` and is kept frozen.
    pub fn new(config: ModelConfig, vocab: Vocabulary, word_table: Tensor<T>, seed: u64) -> Result<Self> {
        if word_table.shape().first() != Some(&vocab.len()) {
            return Err(Error::dim("word table", word_table.shape(), &[vocab.len(), config.word_dim]));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let net = Network::new(&mut params, &config, word_table, &mut rng)?;
        Ok(CsaModel {
            config,
            vocab,
            params,
            net,
        })
    }

    /// Annotates and encodes a raw instance against this model's vocabulary.
    pub fn encode(
        &self,
        inst: &McqInstance,
        tagger: &dyn PosTagger,
        external: Option<&ExternalTags>,
        contextual: Option<&ContextualStore<T>>,
    ) -> Result<EncodedInstance<T>> {
        let feats = annotate(inst, tagger, external);
        EncodedInstance::new(inst, &feats, &self.vocab, &self.config, contextual)
    }

    pub fn encode_all(
        &self,
        instances: &[McqInstance],
        tagger: &dyn PosTagger,
        external: Option<&ExternalTags>,
        contextual: Option<&ContextualStore<T>>,
    ) -> Result<Vec<EncodedInstance<T>>> {
        instances
            .iter()
            .map(|i| self.encode(i, tagger, external, contextual))
            .collect()
    }

    /// Evaluation-mode candidate distribution.
    pub fn predict(&self, inst: &EncodedInstance<T>) -> Result<Vec<T>> {
        let mut g = Graph::new(&self.params, Mode::Eval);
        let out = self.net.forward(&mut g, &self.config, inst)?;
        Ok(g.value(out.probs).data().to_vec())
    }

    /// Evaluation-mode attention cubes, one `[K×C×Q]` tensor per candidate.
    pub fn cubes(&self, inst: &EncodedInstance<T>) -> Result<Vec<Tensor<T>>> {
        let mut g = Graph::new(&self.params, Mode::Eval);
        let out = self.net.forward(&mut g, &self.config, inst)?;
        out.channels
            .iter()
            .map(|ch| {
                let c = stack_channels(&mut g, ch)?;
                Ok(g.value(c).clone())
            })
            .collect()
    }

    pub fn trainable_count(&self) -> usize {
        self.params.trainable_count()
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax<T: Real>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}
