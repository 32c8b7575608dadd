//! Character-offset tokenization and span-to-token alignment.
//!
//! All offsets in this crate are Unicode scalar value (code point) indices
//! into the document text, never byte offsets.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Textual statement of the tokenizer rules. Any change to [`tokenize`] must
/// bump the version tag here so that token-indexed exchange files produced
/// against an older rule set are rejected.
const TOKENIZER_RULES: &str = "anonymeval-tokenizer/v1: maximal runs of Unicode alphanumeric \
code points form one token; every other non-whitespace code point is a token of its own; \
Unicode whitespace separates tokens; offsets are code point indices";

/// Fingerprint of the tokenizer rule set, recorded in every file that refers
/// to tokens by index.
pub fn tokenizer_fingerprint() -> String {
    let digest = Sha256::digest(TOKENIZER_RULES.as_bytes());
    format!("sha256:{}", hex::encode(&digest[..16]))
}

/// One token of a document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSpan {
    pub index: usize,
    pub start: usize,
    pub end: usize,
}

impl TokenSpan {
    pub fn overlaps(&self, start: usize, end: usize) -> bool {
        self.start < end && start < self.end
    }
}

/// Splits `text` into tokens.
///
/// Runs of letters or digits form one token, every punctuation or symbol
/// character is a token by itself and whitespace is dropped.
pub fn tokenize(text: &str) -> Vec<TokenSpan> {
    let mut tokens = Vec::new();
    let mut run_start: Option<usize> = None;
    let mut pos = 0;
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            run_start.get_or_insert(pos);
        } else {
            if let Some(start) = run_start.take() {
                tokens.push(TokenSpan { index: tokens.len(), start, end: pos });
            }
            if !ch.is_whitespace() {
                tokens.push(TokenSpan { index: tokens.len(), start: pos, end: pos + 1 });
            }
        }
        pos += 1;
    }
    if let Some(start) = run_start {
        tokens.push(TokenSpan { index: tokens.len(), start, end: pos });
    }
    tokens
}

/// A set of token indices into one document's tokenization.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenIndexSet(BTreeSet<usize>);

impl TokenIndexSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, index: usize) -> bool {
        self.0.insert(index)
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.contains(&index)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn extend_from(&mut self, other: &TokenIndexSet) {
        self.0.extend(other.0.iter().copied());
    }

    pub fn is_subset(&self, other: &TokenIndexSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn intersection_len(&self, other: &TokenIndexSet) -> usize {
        self.0.intersection(&other.0).count()
    }

    pub fn max(&self) -> Option<usize> {
        self.0.last().copied()
    }
}

impl FromIterator<usize> for TokenIndexSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a TokenIndexSet {
    type Item = &'a usize;
    type IntoIter = std::collections::btree_set::Iter<'a, usize>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlignError {
    #[error("span [{start}, {end}) lies outside a text of {len} characters")]
    MentionOutsideText { start: usize, end: usize, len: usize },
    #[error("span [{start}, {end}) covers no token")]
    EmptyMention { start: usize, end: usize },
}

/// The tokens of one text together with its length in characters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tokenization {
    tokens: Vec<TokenSpan>,
    char_len: usize,
}

impl Tokenization {
    pub fn new(text: &str) -> Self {
        Self { tokens: tokenize(text), char_len: text.chars().count() }
    }

    pub fn tokens(&self) -> &[TokenSpan] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn char_len(&self) -> usize {
        self.char_len
    }

    /// Indices of every token whose range intersects `[start, end)`.
    pub fn project(&self, start: usize, end: usize) -> Result<TokenIndexSet, AlignError> {
        if end > self.char_len || start > end {
            return Err(AlignError::MentionOutsideText { start, end, len: self.char_len });
        }
        if start == end {
            return Err(AlignError::EmptyMention { start, end });
        }
        // first token ending after `start`
        let first = self.tokens.partition_point(|t| t.end <= start);
        let set: TokenIndexSet = self.tokens[first..]
            .iter()
            .take_while(|t| t.start < end)
            .map(|t| t.index)
            .collect();
        if set.is_empty() {
            return Err(AlignError::EmptyMention { start, end });
        }
        Ok(set)
    }

    /// Character range covered by token `index`.
    pub fn char_range(&self, index: usize) -> Option<(usize, usize)> {
        self.tokens.get(index).map(|t| (t.start, t.end))
    }
}

impl fmt::Display for TokenSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}[{},{})", self.index, self.start, self.end)
    }
}

/// Maps code point offsets to byte offsets for one text.
pub(crate) struct CharIndex {
    byte_of_char: Vec<usize>,
}

impl CharIndex {
    pub(crate) fn new(text: &str) -> Self {
        let mut byte_of_char: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        byte_of_char.push(text.len());
        Self { byte_of_char }
    }

    pub(crate) fn byte(&self, char_offset: usize) -> usize {
        self.byte_of_char[char_offset]
    }

    pub(crate) fn char_of_byte(&self, byte: usize) -> usize {
        self.byte_of_char.partition_point(|&b| b < byte)
    }

    pub(crate) fn char_len(&self) -> usize {
        self.byte_of_char.len() - 1
    }

    pub(crate) fn slice<'t>(&self, text: &'t str, start: usize, end: usize) -> &'t str {
        &text[self.byte(start)..self.byte(end)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(text: &str) -> Vec<String> {
        let chars: Vec<char> = text.chars().collect();
        tokenize(text).iter().map(|t| chars[t.start..t.end].iter().collect()).collect()
    }

    #[test]
    fn empty_text() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \n\t").is_empty());
    }

    #[test]
    fn case_number() {
        let toks = tokenize("no. 12345/67");
        assert_eq!(texts("no. 12345/67"), ["no", ".", "12345", "/", "67"]);
        let offsets: Vec<_> = toks.iter().map(|t| (t.start, t.end)).collect();
        assert_eq!(offsets, [(0, 2), (2, 3), (4, 9), (9, 10), (10, 12)]);
    }

    #[test]
    fn date_is_three_tokens() {
        assert_eq!(texts("1 October 2021"), ["1", "October", "2021"]);
    }

    #[test]
    fn offsets_are_code_points() {
        let toks = tokenize("Göteborg, Zürich");
        assert_eq!(toks[0], TokenSpan { index: 0, start: 0, end: 8 });
        assert_eq!(toks[2], TokenSpan { index: 2, start: 10, end: 16 });
    }

    #[test]
    fn projection_examples() {
        let tk = Tokenization::new("John Doe");
        assert_eq!(tk.project(0, 8).unwrap(), [0, 1].into_iter().collect());
        let tk = Tokenization::new("John Doe,");
        assert_eq!(tk.project(5, 8).unwrap(), [1].into_iter().collect());
        assert_eq!(tk.project(1, 4).unwrap(), [0].into_iter().collect());
    }

    #[test]
    fn projection_errors() {
        let tk = Tokenization::new("John  Doe");
        assert_eq!(tk.project(4, 6), Err(AlignError::EmptyMention { start: 4, end: 6 }));
        assert_eq!(tk.project(3, 3), Err(AlignError::EmptyMention { start: 3, end: 3 }));
        assert!(matches!(tk.project(5, 10), Err(AlignError::MentionOutsideText { .. })));
    }

    #[test]
    fn fingerprint_is_stable() {
        assert_eq!(tokenizer_fingerprint(), tokenizer_fingerprint());
        assert!(tokenizer_fingerprint().starts_with("sha256:"));
    }

    /// Per-character classification, independent of the run-scanning loop.
    fn oracle_tokens(text: &str) -> Vec<(usize, usize)> {
        let chars: Vec<char> = text.chars().collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c.is_whitespace() {
                i += 1;
            } else if c.is_alphanumeric() {
                let mut j = i;
                while j < chars.len() && chars[j].is_alphanumeric() {
                    j += 1;
                }
                out.push((i, j));
                i = j;
            } else {
                out.push((i, i + 1));
                i += 1;
            }
        }
        out
    }

    fn text_strategy() -> impl Strategy<Value = String> {
        proptest::collection::vec(
            prop_oneof![
                Just('a'),
                Just('Z'),
                Just('7'),
                Just('é'),
                Just(' '),
                Just('\n'),
                Just('.'),
                Just('/'),
                Just('-'),
                Just('€'),
                Just('\u{a0}'),
                any::<char>(),
            ],
            0..200,
        )
        .prop_map(|v| v.into_iter().collect())
    }

    proptest! {
        #[test]
        fn matches_character_oracle(text in text_strategy()) {
            let got: Vec<_> = tokenize(&text).iter().map(|t| (t.start, t.end)).collect();
            prop_assert_eq!(got, oracle_tokens(&text));
        }

        #[test]
        fn tokens_are_ordered_and_gaps_are_whitespace(text in text_strategy()) {
            let chars: Vec<char> = text.chars().collect();
            let toks = tokenize(&text);
            let mut prev_end = 0;
            for (i, t) in toks.iter().enumerate() {
                prop_assert_eq!(t.index, i);
                prop_assert!(t.start < t.end);
                prop_assert!(t.start >= prev_end);
                prop_assert!(chars[prev_end..t.start].iter().all(|c| c.is_whitespace()));
                prop_assert!(chars[t.start..t.end].iter().all(|c| !c.is_whitespace()));
                prev_end = t.end;
            }
            prop_assert!(chars[prev_end..].iter().all(|c| c.is_whitespace()));
            prop_assert_eq!(tokenize(&text), toks);
        }

        #[test]
        fn projection_matches_overlap_scan(text in text_strategy(), a in 0usize..210, b in 0usize..210) {
            let tk = Tokenization::new(&text);
            let (start, end) = (a.min(b), a.max(b));
            let brute: TokenIndexSet = tk.tokens().iter()
                .filter(|t| t.start < end && start < t.end)
                .map(|t| t.index)
                .collect();
            match tk.project(start, end) {
                Ok(set) => prop_assert_eq!(set, brute),
                Err(AlignError::EmptyMention { .. }) => prop_assert!(brute.is_empty()),
                Err(AlignError::MentionOutsideText { .. }) => prop_assert!(end > tk.char_len()),
            }
        }
    }
}
