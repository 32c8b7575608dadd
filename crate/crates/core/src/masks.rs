//! System masks and the masks exchange file.
//!
//! ```text
//! {
//!   "format_version": 1,
//!   "tokenizer": "sha256:...",            (required when any entry uses "tokens")
//!   "masks": {
//!     "<doc_id>": { "spans": [[start, end], ...] }      character offsets
//!     "<doc_id>": { "tokens": [index, ...] }            token indices
//!   }
//! }
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::tokenize::{tokenizer_fingerprint, AlignError, TokenIndexSet, Tokenization};
use crate::FORMAT_VERSION;

#[derive(Debug, Error)]
pub enum MaskFileError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: unsupported format_version {found}")]
    UnsupportedVersion { path: PathBuf, found: u32 },
    #[error("{path}: token-indexed masks need a tokenizer fingerprint equal to {expected}, found {found:?}")]
    TokenizerMismatch { path: PathBuf, expected: String, found: Option<String> },
    #[error("{path}: mask for {doc_id}: {message}")]
    InvalidMask { path: PathBuf, doc_id: String, message: String },
}

/// The token indices a system chose to mask in one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SystemMask {
    pub doc_id: String,
    pub masked_tokens: TokenIndexSet,
    /// Character spans the token set was projected from, when known.
    pub masked_spans: Option<Vec<(usize, usize)>>,
}

impl SystemMask {
    pub fn empty(doc_id: impl Into<String>) -> Self {
        Self { doc_id: doc_id.into(), masked_tokens: TokenIndexSet::new(), masked_spans: None }
    }

    pub fn from_tokens(doc_id: impl Into<String>, tokens: impl IntoIterator<Item = usize>) -> Self {
        Self { doc_id: doc_id.into(), masked_tokens: tokens.into_iter().collect(), masked_spans: None }
    }

    /// Projects character spans onto tokens by any overlap. Spans covering
    /// only whitespace mask nothing.
    pub fn from_spans(
        doc_id: impl Into<String>,
        tokens: &Tokenization,
        spans: Vec<(usize, usize)>,
    ) -> Result<Self, AlignError> {
        let mut masked_tokens = TokenIndexSet::new();
        for &(start, end) in &spans {
            match tokens.project(start, end) {
                Ok(set) => masked_tokens.extend_from(&set),
                Err(AlignError::EmptyMention { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(Self { doc_id: doc_id.into(), masked_tokens, masked_spans: Some(spans) })
    }
}

pub type MaskSet = BTreeMap<String, SystemMask>;

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum MaskEntry {
    Spans(Vec<(usize, usize)>),
    Tokens(Vec<usize>),
}

#[derive(Debug, Serialize, Deserialize)]
struct MaskFile {
    format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tokenizer: Option<String>,
    masks: BTreeMap<String, MaskEntry>,
}

/// Masks loaded from a file, plus entries that name no corpus document.
#[derive(Debug, Clone, Default)]
pub struct LoadedMasks {
    pub masks: MaskSet,
    pub unknown_documents: Vec<String>,
}

pub fn load_masks(path: impl AsRef<Path>, corpus: &Corpus) -> Result<LoadedMasks, MaskFileError> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|source| MaskFileError::Io { path: path.to_path_buf(), source })?;
    parse_masks(&raw, path, corpus)
}

pub fn parse_masks(raw: &str, origin: &Path, corpus: &Corpus) -> Result<LoadedMasks, MaskFileError> {
    let file: MaskFile = serde_json::from_str(raw)
        .map_err(|e| MaskFileError::Parse { path: origin.to_path_buf(), message: e.to_string() })?;
    if file.format_version != FORMAT_VERSION {
        return Err(MaskFileError::UnsupportedVersion { path: origin.to_path_buf(), found: file.format_version });
    }
    let uses_tokens = file.masks.values().any(|e| matches!(e, MaskEntry::Tokens(_)));
    if uses_tokens && file.tokenizer.as_deref() != Some(tokenizer_fingerprint().as_str()) {
        return Err(MaskFileError::TokenizerMismatch {
            path: origin.to_path_buf(),
            expected: tokenizer_fingerprint(),
            found: file.tokenizer,
        });
    }

    let mut out = LoadedMasks::default();
    for (doc_id, entry) in file.masks {
        let Some(doc) = corpus.get(&doc_id) else {
            out.unknown_documents.push(doc_id);
            continue;
        };
        let tokens = doc.tokenization();
        let invalid = |message: String| MaskFileError::InvalidMask {
            path: origin.to_path_buf(),
            doc_id: doc_id.clone(),
            message,
        };
        let mask = match entry {
            MaskEntry::Spans(spans) => {
                SystemMask::from_spans(doc_id.clone(), &tokens, spans).map_err(|e| invalid(e.to_string()))?
            }
            MaskEntry::Tokens(indices) => {
                if let Some(bad) = indices.iter().find(|&&i| i >= tokens.len()) {
                    return Err(invalid(format!("token index {bad} out of range ({} tokens)", tokens.len())));
                }
                SystemMask::from_tokens(doc_id.clone(), indices)
            }
        };
        out.masks.insert(doc_id, mask);
    }
    Ok(out)
}

/// Serializes masks, in span form where spans are known and token form otherwise.
pub fn masks_to_string(masks: &MaskSet) -> String {
    let entries: BTreeMap<String, MaskEntry> = masks
        .iter()
        .map(|(id, m)| {
            let entry = match &m.masked_spans {
                Some(spans) => MaskEntry::Spans(spans.clone()),
                None => MaskEntry::Tokens(m.masked_tokens.iter().collect()),
            };
            (id.clone(), entry)
        })
        .collect();
    let uses_tokens = entries.values().any(|e| matches!(e, MaskEntry::Tokens(_)));
    let file = MaskFile {
        format_version: FORMAT_VERSION,
        tokenizer: uses_tokens.then(tokenizer_fingerprint),
        masks: entries,
    };
    serde_json::to_string_pretty(&file).expect("masks serialize")
}

pub fn save_masks(masks: &MaskSet, path: impl AsRef<Path>) -> Result<(), MaskFileError> {
    let path = path.as_ref();
    fs::write(path, masks_to_string(masks) + "\n")
        .map_err(|source| MaskFileError::Io { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Document;

    fn corpus() -> Corpus {
        Corpus::new(vec![Document::new("d1", "John Doe, no. 12/3"), Document::new("d2", "x")])
    }

    #[test]
    fn span_form() {
        let raw = r#"{"format_version": 1, "masks": {"d1": {"spans": [[5, 8], [14, 15], [8, 9]]}, "zz": {"spans": []}}}"#;
        let loaded = parse_masks(raw, Path::new("m.json"), &corpus()).unwrap();
        assert_eq!(loaded.unknown_documents, ["zz"]);
        let m = &loaded.masks["d1"];
        assert_eq!(m.masked_tokens, [1, 2, 5].into_iter().collect());
    }

    #[test]
    fn token_form_requires_fingerprint() {
        let raw = r#"{"format_version": 1, "masks": {"d1": {"tokens": [0, 1]}}}"#;
        assert!(matches!(
            parse_masks(raw, Path::new("m.json"), &corpus()),
            Err(MaskFileError::TokenizerMismatch { .. })
        ));
        let raw = format!(
            r#"{{"format_version": 1, "tokenizer": "{}", "masks": {{"d1": {{"tokens": [0, 1]}}}}}}"#,
            tokenizer_fingerprint()
        );
        let loaded = parse_masks(&raw, Path::new("m.json"), &corpus()).unwrap();
        assert_eq!(loaded.masks["d1"].masked_tokens.len(), 2);
    }

    #[test]
    fn out_of_range_rejected() {
        let raw = r#"{"format_version": 1, "masks": {"d2": {"spans": [[0, 5]]}}}"#;
        assert!(matches!(parse_masks(raw, Path::new("m.json"), &corpus()), Err(MaskFileError::InvalidMask { .. })));
    }

    #[test]
    fn round_trip() {
        let c = corpus();
        let mut masks = MaskSet::new();
        masks.insert("d1".into(), SystemMask::from_tokens("d1", [0, 3]));
        let tk = c.documents[1].tokenization();
        masks.insert("d2".into(), SystemMask::from_spans("d2", &tk, vec![(0, 1)]).unwrap());
        let back = parse_masks(&masks_to_string(&masks), Path::new("m.json"), &c).unwrap();
        assert_eq!(back.masks, masks);
    }
}
