use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Coarse part-of-speech tag set (12 tags).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PosTag {
    Noun,
    Verb,
    Adj,
    Adv,
    Pron,
    Det,
    Adp,
    Num,
    Conj,
    Prt,
    Punct,
    Other,
}

impl PosTag {
    pub const COUNT: usize = 12;

    pub const ALL: [PosTag; Self::COUNT] = [
        PosTag::Noun,
        PosTag::Verb,
        PosTag::Adj,
        PosTag::Adv,
        PosTag::Pron,
        PosTag::Det,
        PosTag::Adp,
        PosTag::Num,
        PosTag::Conj,
        PosTag::Prt,
        PosTag::Punct,
        PosTag::Other,
    ];

    pub fn id(self) -> usize {
        self as usize
    }

    /// Parses a universal tag name or a Penn Treebank tag.
    pub fn from_label(label: &str) -> Option<PosTag> {
        let t = match label.to_ascii_uppercase().as_str() {
            "NOUN" | "NN" | "NNS" | "NNP" | "NNPS" | "PROPN" => PosTag::Noun,
            "VERB" | "VB" | "VBD" | "VBG" | "VBN" | "VBP" | "VBZ" | "MD" | "AUX" => PosTag::Verb,
            "ADJ" | "JJ" | "JJR" | "JJS" => PosTag::Adj,
            "ADV" | "RB" | "RBR" | "RBS" | "WRB" => PosTag::Adv,
            "PRON" | "PRP" | "PRP$" | "WP" | "WP$" => PosTag::Pron,
            "DET" | "DT" | "PDT" | "WDT" => PosTag::Det,
            "ADP" | "IN" => PosTag::Adp,
            "NUM" | "CD" => PosTag::Num,
            "CONJ" | "CCONJ" | "SCONJ" | "CC" => PosTag::Conj,
            "PRT" | "PART" | "RP" | "TO" | "POS" => PosTag::Prt,
            "." | "PUNCT" | "," | ":" | "``" | "''" => PosTag::Punct,
            "X" | "OTHER" | "SYM" | "FW" | "LS" | "UH" | "INTJ" => PosTag::Other,
            _ => return None,
        };
        Some(t)
    }
}

/// Assigns one tag per token.
pub trait PosTagger: Send + Sync {
    fn tag(&self, tokens: &[String]) -> Vec<PosTag>;
}

/// Deterministic fallback tagger: a closed-class lexicon, then suffix rules,
/// defaulting to `Noun`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SuffixTagger;

const DETERMINERS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "every", "each", "some", "any", "no", "all", "both",
    "either", "neither", "another", "which", "whatever",
];
const PRONOUNS: &[&str] = &[
    "i", "me", "my", "mine", "you", "your", "yours", "he", "him", "his", "she", "her", "hers", "it", "its",
    "we", "us", "our", "ours", "they", "them", "their", "theirs", "myself", "yourself", "himself", "herself",
    "itself", "ourselves", "themselves", "who", "whom", "whose", "what", "someone", "something", "anyone",
    "anything", "everyone", "everything", "nobody", "nothing",
];
const ADPOSITIONS: &[&str] = &[
    "in", "on", "at", "of", "for", "with", "from", "by", "about", "into", "over", "under", "after", "before",
    "between", "through", "during", "without", "within", "against", "among", "across", "behind", "upon",
    "near", "since", "until", "like", "than", "toward", "towards",
];
const CONJUNCTIONS: &[&str] = &["and", "or", "but", "nor", "so", "yet", "because", "although", "though", "if", "unless", "while", "whether"];
const PARTICLES: &[&str] = &["to", "not", "n't", "up", "off", "out", "'s"];
const ADVERBS: &[&str] = &[
    "very", "too", "also", "just", "only", "often", "never", "always", "again", "here", "there", "now", "then",
    "why", "how", "when", "where", "soon", "still", "already", "ever", "even", "well", "almost", "quite",
];
const VERBS: &[&str] = &[
    "is", "am", "are", "was", "were", "be", "been", "being", "do", "does", "did", "have", "has", "had", "can",
    "could", "will", "would", "shall", "should", "may", "might", "must", "go", "goes", "went", "gone", "get",
    "got", "make", "made", "take", "took", "see", "saw", "seen", "come", "came", "know", "knew", "think",
    "thought", "say", "said", "give", "gave", "use", "find", "found", "tell", "told", "put", "let", "eat",
    "ate", "drink", "boil", "show", "want", "need", "feel", "felt", "keep", "kept", "help", "ask", "try",
    "became", "become", "left", "read", "write", "wrote", "buy", "bought", "run", "ran", "sat",
];
const NUMBERS: &[&str] = &[
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
    "twenty", "thirty", "hundred", "thousand", "million", "first", "second", "third",
];

impl SuffixTagger {
    pub fn tag_token(token: &str) -> PosTag {
        let t = token;
        let in_list = |l: &[&str]| l.contains(&t);
        if t.chars().all(|c| c.is_ascii_digit()) && !t.is_empty() {
            return PosTag::Num;
        }
        if !t.chars().any(char::is_alphanumeric) {
            return PosTag::Punct;
        }
        if in_list(DETERMINERS) {
            PosTag::Det
        } else if in_list(PRONOUNS) {
            PosTag::Pron
        } else if in_list(ADPOSITIONS) {
            PosTag::Adp
        } else if in_list(CONJUNCTIONS) {
            PosTag::Conj
        } else if in_list(PARTICLES) {
            PosTag::Prt
        } else if in_list(ADVERBS) {
            PosTag::Adv
        } else if in_list(VERBS) {
            PosTag::Verb
        } else if in_list(NUMBERS) {
            PosTag::Num
        } else {
            Self::by_suffix(t)
        }
    }

    fn by_suffix(t: &str) -> PosTag {
        let n = t.chars().count();
        let ends = |s: &str| t.ends_with(s) && n > s.len() + 1;
        if ends("ly") {
            PosTag::Adv
        } else if ends("ing") || ends("ed") || ends("ize") || ends("ise") || ends("ate") || ends("ify") {
            PosTag::Verb
        } else if ["ous", "ful", "ive", "able", "ible", "al", "ic", "less", "est", "ish", "ary"]
            .iter()
            .any(|s| ends(s))
        {
            PosTag::Adj
        } else {
            PosTag::Noun
        }
    }
}

impl PosTagger for SuffixTagger {
    fn tag(&self, tokens: &[String]) -> Vec<PosTag> {
        tokens.iter().map(|t| Self::tag_token(t)).collect()
    }
}

/// Precomputed tags per instance, loaded from jsonl records
/// `{id, passage_tags, question_tags, candidate_tags}`.
#[derive(Debug, Clone, Default)]
pub struct ExternalTags {
    by_id: HashMap<String, StreamTags>,
}

#[derive(Debug, Clone, Default)]
pub struct StreamTags {
    pub passage: Vec<PosTag>,
    pub question: Vec<PosTag>,
    pub candidates: Vec<Vec<PosTag>>,
}

#[derive(Deserialize)]
struct TagRecord {
    id: String,
    passage_tags: Vec<String>,
    question_tags: Vec<String>,
    candidate_tags: Vec<Vec<String>>,
}

fn parse_tags(labels: &[String], id: &str) -> Vec<PosTag> {
    labels
        .iter()
        .map(|l| {
            PosTag::from_label(l).unwrap_or_else(|| {
                log::warn!("instance {id}: unknown POS tag `{l}` mapped to OTHER");
                PosTag::Other
            })
        })
        .collect()
}

impl ExternalTags {
    pub fn load(path: &Path) -> Result<Self> {
        let reader = BufReader::new(fs::File::open(path)?);
        let mut by_id = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TagRecord = serde_json::from_str(&line).map_err(|e| Error::Format {
                path: path.to_path_buf(),
                line: i + 1,
                msg: e.to_string(),
            })?;
            let tags = StreamTags {
                passage: parse_tags(&rec.passage_tags, &rec.id),
                question: parse_tags(&rec.question_tags, &rec.id),
                candidates: rec.candidate_tags.iter().map(|c| parse_tags(c, &rec.id)).collect(),
            };
            by_id.insert(rec.id, tags);
        }
        Ok(ExternalTags { by_id })
    }

    pub fn insert(&mut self, id: impl Into<String>, tags: StreamTags) {
        self.by_id.insert(id.into(), tags);
    }

    pub fn get(&self, id: &str) -> Option<&StreamTags> {
        self.by_id.get(id)
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn fallback_rules() {
        let tags = SuffixTagger.tag(&toks(&["running", "the", "quickly", "famous", "teacher", "42", "they", "in"]));
        assert_eq!(
            tags,
            vec![
                PosTag::Verb,
                PosTag::Det,
                PosTag::Adv,
                PosTag::Adj,
                PosTag::Noun,
                PosTag::Num,
                PosTag::Pron,
                PosTag::Adp
            ]
        );
        assert!(SuffixTagger.tag(&[]).is_empty());
        // Short words are not caught by suffix rules.
        assert_eq!(SuffixTagger::tag_token("bed"), PosTag::Noun);
        assert_eq!(SuffixTagger::tag_token("sing"), PosTag::Noun);
    }

    #[test]
    fn tag_ids_are_dense() {
        for (i, t) in PosTag::ALL.iter().enumerate() {
            assert_eq!(t.id(), i);
        }
    }

    #[test]
    fn external_file_with_unknown_tag() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pos.jsonl");
        fs::write(
            &p,
            r#"{"id":"x","passage_tags":["NN","VBD"],"question_tags":["WRB","BOGUS"],"candidate_tags":[["DT"],["NOUN"]]}"#,
        )
        .unwrap();
        let ext = ExternalTags::load(&p).unwrap();
        let t = ext.get("x").unwrap();
        assert_eq!(t.passage, vec![PosTag::Noun, PosTag::Verb]);
        assert_eq!(t.question, vec![PosTag::Adv, PosTag::Other]);
        assert_eq!(t.candidates[1], vec![PosTag::Noun]);
    }
}
