/// Splits raw text into lowercase word tokens.
pub trait Tokenizer: Send + Sync {
    fn tokenize(&self, text: &str) -> Vec<String>;
}

/// Rule-based fallback tokenizer.
///
/// Tokens are maximal runs of alphanumeric characters, lowercased. An
/// apostrophe survives only between two alphanumerics (`don't`, `girl's`);
/// every other non-alphanumeric character is a boundary and is dropped, so
/// punctuation-only tokens never appear.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleTokenizer;

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

impl Tokenizer for RuleTokenizer {
    fn tokenize(&self, text: &str) -> Vec<String> {
        let chars: Vec<char> = text.chars().collect();
        let mut tokens = Vec::new();
        let mut cur = String::new();
        for (i, &c) in chars.iter().enumerate() {
            if c.is_alphanumeric() {
                cur.extend(c.to_lowercase().filter(|l| l.is_alphanumeric()));
            } else if is_apostrophe(c)
                && !cur.is_empty()
                && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric())
            {
                cur.push(c);
            } else if !cur.is_empty() {
                tokens.push(std::mem::take(&mut cur));
            }
        }
        if !cur.is_empty() {
            tokens.push(cur);
        }
        tokens
    }
}

/// Tokenizes with the built-in [`RuleTokenizer`].
pub fn tokenize(text: &str) -> Vec<String> {
    RuleTokenizer.tokenize(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(tokenize("The cat, sat."), vec!["the", "cat", "sat"]);
        assert!(tokenize("").is_empty());
        assert_eq!(
            tokenize("Why did they use a kettle?"),
            vec!["why", "did", "they", "use", "a", "kettle"]
        );
    }

    #[test]
    fn apostrophes_and_punctuation() {
        assert_eq!(tokenize("Don't 'quote' me -- ok?!"), vec!["don't", "quote", "me", "ok"]);
        assert_eq!(tokenize("girl’s book"), vec!["girl’s", "book"]);
        assert_eq!(tokenize("from 12 to 83."), vec!["from", "12", "to", "83"]);
        assert!(tokenize("... !!! --").is_empty());
        assert_eq!(tokenize("well-known"), vec!["well", "known"]);
    }

    proptest! {
        #[test]
        fn idempotent(text in "\\PC{0,60}") {
            let once = tokenize(&text);
            let twice = tokenize(&once.join(" "));
            prop_assert_eq!(&once, &twice);
            for t in &once {
                prop_assert!(t.chars().any(|c| c.is_alphanumeric()));
            }
        }
    }
}
