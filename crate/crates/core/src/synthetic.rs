//! Synthetic lexical-overlap questions: the correct candidate is the only
//! one sharing two or more tokens with the passage.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{McqInstance, QuestionType};

const POOL_SEED: u64 = 0x5EED;
const POOL_SIZE: usize = 400;
const PASSAGE_TOKENS: usize = 10;
const CANDIDATE_TOKENS: usize = 3;

/// Fixed pool of distinct five-letter consonant-vowel words. Equal length
/// means no pool word is a substring of another, so fuzzy matches coincide
/// with exact ones.
pub fn word_pool() -> Vec<String> {
    const C: &[u8] = b"bdfgklmnprstvz";
    const V: &[u8] = b"aeiou";
    let mut rng = ChaCha8Rng::seed_from_u64(POOL_SEED);
    let mut pool = Vec::with_capacity(POOL_SIZE);
    let mut seen = std::collections::HashSet::new();
    while pool.len() < POOL_SIZE {
        let w: String = (0..5)
            .map(|i| {
                let set = if i % 2 == 0 { C } else { V };
                set[rng.gen_range(0..set.len())] as char
            })
            .collect();
        if seen.insert(w.clone()) {
            pool.push(w);
        }
    }
    pool
}

/// `n` instances with `num_candidates` candidates each. Passages hold 10
/// tokens, questions 7, candidates 3. Distractors share at most one token
/// with the passage.
pub fn lexical_overlap_dataset(n: usize, num_candidates: usize, seed: u64) -> Vec<McqInstance> {
    let pool = word_pool();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wh = [
        ("what", QuestionType::What),
        ("which", QuestionType::Which),
        ("why", QuestionType::Why),
        ("how", QuestionType::How),
    ];
    (0..n)
        .map(|i| {
            let picked: Vec<&String> = pool.choose_multiple(&mut rng, PASSAGE_TOKENS + 3 * num_candidates + 2).collect();
            let (passage, rest) = picked.split_at(PASSAGE_TOKENS);
            let (outside, extra) = rest.split_at(3 * num_candidates);
            let mut outside = outside.iter();
            let answer = rng.gen_range(0..num_candidates);
            let candidates = (0..num_candidates)
                .map(|c| {
                    let shared = if c == answer { 2 } else { rng.gen_range(0..2) };
                    let mut toks: Vec<String> =
                        passage.choose_multiple(&mut rng, shared).map(|w| w.to_string()).collect();
                    while toks.len() < CANDIDATE_TOKENS {
                        toks.push(outside.next().expect("enough outside words").to_string());
                    }
                    toks.shuffle(&mut rng);
                    toks
                })
                .collect();
            let (w, qtype) = wh[rng.gen_range(0..wh.len())];
            let mut question: Vec<String> = [w, "option", "matches", "the", "story"].iter().map(|s| s.to_string()).collect();
            question.extend(extra.iter().map(|s| s.to_string()));
            McqInstance {
                id: format!("syn-{seed}-{i}"),
                passage: passage.iter().map(|s| s.to_string()).collect(),
                question,
                candidates,
                answer,
                qtype,
            }
        })
        .collect()
}
