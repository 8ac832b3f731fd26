//! Approximate token counting.
//!
//! Token budgets in this crate are measured with a deterministic segmenter
//! rather than a model tokenizer: a token is a maximal run of alphanumeric
//! characters or a maximal run of other non-whitespace characters. The
//! [`Tokenizer`] trait lets a model-specific tokenizer be plugged in where
//! budgets must match a real context window.

/// Splits text into tokens and counts them.
pub trait Tokenizer: Send + Sync {
    fn tokens<'a>(&self, text: &'a str) -> Vec<&'a str>;

    fn count(&self, text: &str) -> usize {
        self.tokens(text).len()
    }
}

/// The crate's reference tokenizer: whitespace separates tokens, and a class
/// switch between alphanumeric and symbol characters starts a new token.
///
/// `"hello world"` counts 2, `"| a | b |"` counts 5 (`|` runs are tokens).
#[derive(Debug, Clone, Copy, Default)]
pub struct ApproxTokenizer;

#[derive(PartialEq)]
enum CharClass {
    Word,
    Symbol,
}

fn classify(c: char) -> Option<CharClass> {
    if c.is_whitespace() {
        None
    } else if c.is_alphanumeric() {
        Some(CharClass::Word)
    } else {
        Some(CharClass::Symbol)
    }
}

impl Tokenizer for ApproxTokenizer {
    fn tokens<'a>(&self, text: &'a str) -> Vec<&'a str> {
        let mut out = Vec::new();
        let mut start: Option<(usize, CharClass)> = None;
        for (i, c) in text.char_indices() {
            match (classify(c), &mut start) {
                (None, Some((s, _))) => {
                    out.push(&text[*s..i]);
                    start = None;
                }
                (None, None) => {}
                (Some(class), Some((s, current))) => {
                    if class != *current {
                        out.push(&text[*s..i]);
                        start = Some((i, class));
                    }
                }
                (Some(class), None) => start = Some((i, class)),
            }
        }
        if let Some((s, _)) = start {
            out.push(&text[s..]);
        }
        out
    }
}

/// Counts tokens with the reference tokenizer.
pub fn count_tokens(text: &str) -> usize {
    ApproxTokenizer.count(text)
}
