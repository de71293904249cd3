use std::collections::BTreeSet;
use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;

use super::CorpusError;

/// Runs of word characters, or runs of anything that is neither a word
/// character nor whitespace.
static TOKEN_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"[\p{L}\p{N}\p{M}]+|[^\s\p{L}\p{N}\p{M}]+").expect("static pattern")
});

const APOSTROPHES: [char; 3] = ['\'', '\u{2019}', '\u{02BC}'];

/// A lowercased surface form with the half-open character interval it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub char_start: usize,
    pub char_end: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenSequence {
    pub tokens: Vec<Token>,
    /// Length of the tokenized text in characters.
    pub char_len: usize,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.surface.as_str())
    }

    /// Indices of the tokens overlapping `[start, end)` by at least one character.
    pub fn words_in(&self, start: usize, end: usize) -> Result<BTreeSet<usize>, CorpusError> {
        Ok(self.word_range(start, end)?.collect())
    }

    /// Contiguous index range of the tokens overlapping `[start, end)`.
    pub fn word_range(&self, start: usize, end: usize) -> Result<Range<usize>, CorpusError> {
        if start >= end || end > self.char_len {
            return Err(CorpusError::SpanOutOfRange {
                start,
                end,
                len: self.char_len,
            });
        }
        let first = self.tokens.partition_point(|t| t.char_end <= start);
        let last = self.tokens.partition_point(|t| t.char_start < end);
        Ok(first..last.max(first))
    }

    /// Drops tokens without any letter or digit, as used for lexical overlap.
    pub fn without_punctuation(&self) -> TokenSequence {
        TokenSequence {
            tokens: self
                .tokens
                .iter()
                .filter(|t| t.surface.chars().any(char::is_alphanumeric))
                .cloned()
                .collect(),
            char_len: self.char_len,
        }
    }
}

/// Splits `text` into lowercased word and punctuation tokens.
///
/// Whitespace separates tokens and is dropped. A run of word characters
/// (letters, digits, combining marks) is one token and a run of any other
/// non-space characters is another. A punctuation run that ends in an
/// apostrophe and is directly followed by a lone `s` absorbs it, so
/// `Goldsmith's` yields `goldsmith` and `'s`. Offsets count characters of the
/// original string.
pub fn tokenize(text: &str) -> TokenSequence {
    let mut tokens: Vec<Token> = Vec::new();
    let mut byte_cursor = 0;
    let mut char_cursor = 0;
    for m in TOKEN_RE.find_iter(text) {
        char_cursor += text[byte_cursor..m.start()].chars().count();
        let raw = m.as_str();
        let char_start = char_cursor;
        let char_end = char_start + raw.chars().count();
        byte_cursor = m.end();
        char_cursor = char_end;

        let surface = raw.to_lowercase();
        if surface == "s" {
            if let Some(prev) = tokens.last_mut() {
                if prev.char_end == char_start && prev.surface.ends_with(APOSTROPHES) {
                    prev.surface.push('s');
                    prev.char_end = char_end;
                    continue;
                }
            }
        }
        tokens.push(Token {
            surface,
            char_start,
            char_end,
        });
    }
    char_cursor += text[byte_cursor..].chars().count();
    TokenSequence {
        tokens,
        char_len: char_cursor,
    }
}
