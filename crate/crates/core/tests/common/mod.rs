#![allow(dead_code)]

use csa_core::corpus::{random_embeddings, McqInstance, QuestionType, Vocabulary};
use csa_core::synthetic::word_pool;
use csa_core::{CsaModel, ModelConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random instances whose streams fit the micro limits, with random lengths
/// and random answer positions. Candidates sometimes reuse passage words so
/// the match features are not constant.
pub fn random_instances(n: usize, num_candidates: usize, seed: u64, config: &ModelConfig) -> Vec<McqInstance> {
    let pool = word_pool();
    let wh = ["what", "why", "how", "who", "when", "where", "which", "does"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let draw = |rng: &mut ChaCha8Rng, max: usize| -> Vec<String> {
                let len = rng.gen_range(1..=max);
                (0..len).map(|_| pool.choose(rng).unwrap().clone()).collect()
            };
            let passage = draw(&mut rng, config.passage_len);
            let mut question = draw(&mut rng, config.question_len);
            question[0] = wh.choose(&mut rng).unwrap().to_string();
            let candidates = (0..num_candidates)
                .map(|_| {
                    let mut c = draw(&mut rng, config.candidate_len);
                    if rng.gen_bool(0.5) {
                        c[0] = passage.choose(&mut rng).unwrap().clone();
                    }
                    c
                })
                .collect();
            McqInstance {
                id: format!("rand-{seed}-{i}"),
                qtype: QuestionType::classify(&question),
                passage,
                question,
                candidates,
                answer: rng.gen_range(0..num_candidates),
            }
        })
        .collect()
}

/// A seeded f64 model whose vocabulary covers `instances`.
pub fn model_for(instances: &[McqInstance], config: ModelConfig, seed: u64) -> CsaModel<f64> {
    let vocab = Vocabulary::build(instances);
    let table = random_embeddings(&vocab, config.word_dim, seed);
    CsaModel::new(config, vocab, table, seed).unwrap()
}
