use std::fmt;

use serde::{Deserialize, Serialize};

/// Wh-word class of a question, used for the per-type evaluation breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionType {
    What,
    Why,
    How,
    Who,
    When,
    Where,
    Which,
    Other,
}

impl QuestionType {
    pub const ALL: [QuestionType; 8] = [
        QuestionType::What,
        QuestionType::Why,
        QuestionType::How,
        QuestionType::Who,
        QuestionType::When,
        QuestionType::Where,
        QuestionType::Which,
        QuestionType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionType::What => "what",
            QuestionType::Why => "why",
            QuestionType::How => "how",
            QuestionType::Who => "who",
            QuestionType::When => "when",
            QuestionType::Where => "where",
            QuestionType::Which => "which",
            QuestionType::Other => "other",
        }
    }

    /// Class of the first wh-word among the (lowercased) question tokens.
    pub fn classify<S: AsRef<str>>(question: &[S]) -> Self {
        question
            .iter()
            .find_map(|t| match t.as_ref() {
                "what" => Some(QuestionType::What),
                "why" => Some(QuestionType::Why),
                "how" => Some(QuestionType::How),
                "who" => Some(QuestionType::Who),
                "when" => Some(QuestionType::When),
                "where" => Some(QuestionType::Where),
                "which" => Some(QuestionType::Which),
                _ => None,
            })
            .unwrap_or(QuestionType::Other)
    }
}

impl fmt::Display for QuestionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One multiple-choice example: passage, question, N candidate answers and
/// the 0-based index of the correct one. Tokens are lowercased and free of
/// punctuation-only strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McqInstance {
    pub id: String,
    pub passage: Vec<String>,
    pub question: Vec<String>,
    pub candidates: Vec<Vec<String>>,
    pub answer: usize,
    pub qtype: QuestionType,
}

impl McqInstance {
    pub fn num_candidates(&self) -> usize {
        self.candidates.len()
    }
}
