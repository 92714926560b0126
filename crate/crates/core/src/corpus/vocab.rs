use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::McqInstance;

/// Token ↔ index map. Index 0 is padding, index 1 the unknown token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub const PAD: usize = 0;
    pub const UNK: usize = 1;
    pub const PAD_TOKEN: &'static str = "<pad>";
    pub const UNK_TOKEN: &'static str = "<unk>";

    pub fn new() -> Self {
        Self::from(Vec::new())
    }

    /// Vocabulary over every token of the given instances, in first-seen order.
    pub fn build<'a>(instances: impl IntoIterator<Item = &'a McqInstance>) -> Self {
        let mut v = Self::new();
        for inst in instances {
            for tok in inst
                .passage
                .iter()
                .chain(&inst.question)
                .chain(inst.candidates.iter().flatten())
            {
                v.insert(tok);
            }
        }
        v
    }

    pub fn insert(&mut self, token: &str) -> usize {
        if let Some(&i) = self.index.get(token) {
            return i;
        }
        let i = self.tokens.len();
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), i);
        i
    }

    /// Index of `token`, or [`Self::UNK`].
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(Self::UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 2
    }

    /// Non-reserved entries as `(index, token)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, &str)> {
        self.tokens.iter().enumerate().skip(2).map(|(i, t)| (i, t.as_str()))
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        let mut v = Vocabulary {
            tokens: vec![Self::PAD_TOKEN.to_string(), Self::UNK_TOKEN.to_string()],
            index: HashMap::new(),
        };
        v.index.insert(Self::PAD_TOKEN.to_string(), Self::PAD);
        v.index.insert(Self::UNK_TOKEN.to_string(), Self::UNK);
        for t in tokens {
            v.insert(&t);
        }
        v
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens.into_iter().skip(2).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_indices_and_roundtrip() {
        let mut v = Vocabulary::new();
        assert_eq!(v.id("anything"), Vocabulary::UNK);
        let cat = v.insert("cat");
        assert_eq!(cat, 2);
        assert_eq!(v.insert("cat"), 2);
        assert_eq!(v.insert("dog"), 3);
        assert_eq!(v.token(0), Some("<pad>"));
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"["cat","dog"]"#);
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert_eq!(v.entries().collect::<Vec<_>>(), vec![(2, "cat"), (3, "dog")]);
    }
}
