use std::collections::HashSet;

use super::pos::{ExternalTags, PosTag, PosTagger};
use super::McqInstance;

/// Per-token lexical features of one stream.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureAnnotation {
    pub pos: Vec<PosTag>,
    pub exact: Vec<bool>,
    pub fuzzy: Vec<bool>,
}

impl FeatureAnnotation {
    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }
}

/// Features of every stream of an instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFeatures {
    pub passage: FeatureAnnotation,
    pub question: FeatureAnnotation,
    pub candidates: Vec<FeatureAnnotation>,
}

/// 1 where the token string occurs in `reference`.
pub fn word_match(stream: &[String], reference: &HashSet<&str>) -> Vec<bool> {
    stream.iter().map(|t| reference.contains(t.as_str())).collect()
}

const FUZZY_MIN_CHARS: usize = 3;

fn fuzzy_pair(a: &str, b: &str) -> bool {
    a.chars().count() >= FUZZY_MIN_CHARS
        && b.chars().count() >= FUZZY_MIN_CHARS
        && (a.contains(b) || b.contains(a))
}

/// Partial-match feature: 1 where the token equals a reference token, or
/// where one of the two is a substring of the other and both are at least
/// three characters long ("teach" ~ "teacher"). Exact matches always count,
/// so `word_match ⇒ fuzzy_match` holds for short tokens too.
pub fn fuzzy_match(stream: &[String], reference: &HashSet<&str>) -> Vec<bool> {
    stream
        .iter()
        .map(|t| reference.contains(t.as_str()) || reference.iter().any(|r| fuzzy_pair(t, r)))
        .collect()
}

fn annotate_stream(
    tokens: &[String],
    reference: &HashSet<&str>,
    tagger: &dyn PosTagger,
    external: Option<&[PosTag]>,
) -> FeatureAnnotation {
    let mut pos = tagger.tag(tokens);
    if let Some(ext) = external {
        if ext.len() != tokens.len() {
            log::warn!(
                "external POS tags cover {} of {} tokens; remaining positions use the fallback tagger",
                ext.len().min(tokens.len()),
                tokens.len()
            );
        }
        for (slot, &t) in pos.iter_mut().zip(ext) {
            *slot = t;
        }
    }
    FeatureAnnotation {
        pos,
        exact: word_match(tokens, reference),
        fuzzy: fuzzy_match(tokens, reference),
    }
}

/// Computes features for all streams. Passage tokens are matched against the
/// union of question and candidate tokens; question and candidate tokens are
/// matched against the passage. Tags from `external` take precedence over
/// the tagger for the same instance.
pub fn annotate(inst: &McqInstance, tagger: &dyn PosTagger, external: Option<&ExternalTags>) -> InstanceFeatures {
    let passage_ref: HashSet<&str> = inst.passage.iter().map(String::as_str).collect();
    let qc_ref: HashSet<&str> = inst
        .question
        .iter()
        .chain(inst.candidates.iter().flatten())
        .map(String::as_str)
        .collect();
    let ext = external.and_then(|e| e.get(&inst.id));
    InstanceFeatures {
        passage: annotate_stream(&inst.passage, &qc_ref, tagger, ext.map(|e| e.passage.as_slice())),
        question: annotate_stream(&inst.question, &passage_ref, tagger, ext.map(|e| e.question.as_slice())),
        candidates: inst
            .candidates
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let ext_c = ext.and_then(|e| e.candidates.get(i)).map(Vec::as_slice);
                annotate_stream(c, &passage_ref, tagger, ext_c)
            })
            .collect(),
    }
}
