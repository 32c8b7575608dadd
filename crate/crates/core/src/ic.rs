//! Information content providers.
//!
//! A provider assigns every token of a document a non-negative weight in
//! nats: `-ln p` for some probability estimate `p` of that token.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::tokenize::{tokenize, tokenizer_fingerprint};
use crate::FORMAT_VERSION;

/// Probabilities below this are clamped before taking the logarithm.
pub const PROBABILITY_FLOOR: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum IcError {
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
    #[error("{path}: tokenizer fingerprint {found} does not match {expected}")]
    TokenizerMismatch { path: PathBuf, expected: String, found: String },
    #[error("document {doc_id}, token {token_index}: probability {probability} outside [0, 1]")]
    ProbabilityOutOfRange { doc_id: String, token_index: usize, probability: f64 },
    #[error("no information content for document {doc_id}, token {token_index}")]
    MissingEntry { doc_id: String, token_index: usize },
}

/// `-ln p`, with `p` clamped to [`PROBABILITY_FLOOR`]. Never negative.
pub fn information_content(p: f64) -> f64 {
    let ic = -p.max(PROBABILITY_FLOOR).ln();
    if ic > 0.0 {
        ic
    } else {
        0.0
    }
}

/// Add-one smoothed unigram model over case-folded token strings.
#[derive(Debug, Clone, Default)]
pub struct UnigramIc {
    counts: HashMap<String, u64>,
    total: u64,
}

impl UnigramIc {
    pub fn from_corpus(corpus: &Corpus) -> Self {
        Self::from_texts(corpus.documents.iter().map(|d| d.text.as_str()))
    }

    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut model = Self::default();
        for text in texts {
            let chars: Vec<char> = text.chars().collect();
            for t in tokenize(text) {
                let s: String = chars[t.start..t.end].iter().collect();
                *model.counts.entry(s.to_lowercase()).or_default() += 1;
                model.total += 1;
            }
        }
        model
    }

    pub fn vocabulary_size(&self) -> usize {
        self.counts.len()
    }

    pub fn token_count(&self) -> u64 {
        self.total
    }

    pub fn probability(&self, token_text: &str) -> f64 {
        let c = self.counts.get(&token_text.to_lowercase()).copied().unwrap_or(0);
        (c + 1) as f64 / (self.total + self.counts.len() as u64) as f64
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct IcEntry {
    pub token_index: usize,
    pub probability: f64,
}

/// The IC exchange file written by probability exporters.
#[derive(Debug, Serialize, Deserialize)]
pub struct IcExchangeFile {
    pub format_version: u32,
    pub tokenizer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
    pub documents: std::collections::BTreeMap<String, Vec<IcEntry>>,
}

/// Per-token probabilities loaded from an exchange file.
#[derive(Debug, Clone, Default)]
pub struct ExternalIc {
    probabilities: HashMap<String, HashMap<usize, f64>>,
}

impl ExternalIc {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, IcError> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|source| IcError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&raw, path)
    }

    pub fn parse(raw: &str, origin: &Path) -> Result<Self, IcError> {
        let file: IcExchangeFile = serde_json::from_str(raw)
            .map_err(|e| IcError::Parse { path: origin.to_path_buf(), message: e.to_string() })?;
        if file.format_version != FORMAT_VERSION {
            return Err(IcError::UnsupportedVersion { path: origin.to_path_buf(), found: file.format_version });
        }
        let expected = tokenizer_fingerprint();
        if file.tokenizer != expected {
            return Err(IcError::TokenizerMismatch { path: origin.to_path_buf(), expected, found: file.tokenizer });
        }
        let mut probabilities = HashMap::new();
        for (doc_id, entries) in file.documents {
            let mut per_doc = HashMap::with_capacity(entries.len());
            for e in entries {
                if !(0.0..=1.0).contains(&e.probability) {
                    return Err(IcError::ProbabilityOutOfRange {
                        doc_id,
                        token_index: e.token_index,
                        probability: e.probability,
                    });
                }
                per_doc.insert(e.token_index, e.probability);
            }
            probabilities.insert(doc_id, per_doc);
        }
        Ok(Self { probabilities })
    }

    pub fn probability(&self, doc_id: &str, token_index: usize) -> Option<f64> {
        self.probabilities.get(doc_id)?.get(&token_index).copied()
    }
}

#[derive(Debug, Clone, Default)]
pub enum IcProvider {
    #[default]
    Uniform,
    Unigram(UnigramIc),
    External(ExternalIc),
}

impl IcProvider {
    pub fn kind(&self) -> &'static str {
        match self {
            IcProvider::Uniform => "uniform",
            IcProvider::Unigram(_) => "unigram",
            IcProvider::External(_) => "external",
        }
    }

    /// Information content of token `token_index` of `doc_id`, whose surface
    /// text is `token_text`.
    pub fn query(&self, doc_id: &str, token_index: usize, token_text: &str) -> Result<f64, IcError> {
        match self {
            IcProvider::Uniform => Ok(1.0),
            IcProvider::Unigram(m) => Ok(information_content(m.probability(token_text))),
            IcProvider::External(x) => x
                .probability(doc_id, token_index)
                .map(information_content)
                .ok_or_else(|| IcError::MissingEntry { doc_id: doc_id.to_string(), token_index }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn exchange(entries: &str) -> String {
        format!(
            r#"{{"format_version": 1, "tokenizer": "{}", "documents": {{"d": [{entries}]}}}}"#,
            tokenizer_fingerprint()
        )
    }

    #[test]
    fn uniform_is_one() {
        let p = IcProvider::Uniform;
        let total: f64 = (0..10).map(|i| p.query("d", i, "w").unwrap()).sum();
        assert_eq!(p.query("d", 3, "anything").unwrap(), 1.0);
        assert_eq!(total, 10.0);
    }

    #[test]
    fn unigram_single_type_has_zero_ic() {
        for n in [1usize, 5, 100] {
            let text = vec!["a"; n].join(" ");
            let m = UnigramIc::from_texts([text.as_str()]);
            assert_eq!(information_content(m.probability("a")), 0.0);
        }
    }

    #[test]
    fn unigram_add_one() {
        let m = UnigramIc::from_texts(["a a b"]);
        let p = IcProvider::Unigram(m);
        let ia = p.query("d", 0, "a").unwrap();
        let ib = p.query("d", 2, "B").unwrap();
        assert!((ia - -(3.0f64 / 5.0).ln()).abs() < 1e-15);
        assert!((ib - -(2.0f64 / 5.0).ln()).abs() < 1e-15);
        assert!(ib > ia);
        let iz = p.query("d", 9, "zzz").unwrap();
        assert!((iz - -(1.0f64 / 5.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn external_values() {
        let raw = exchange(
            r#"{"token_index": 0, "probability": 1.0},
               {"token_index": 1, "probability": 0.006737946999085467},
               {"token_index": 2, "probability": 0.0}"#,
        );
        let p = IcProvider::External(ExternalIc::parse(&raw, Path::new("ic.json")).unwrap());
        assert_eq!(p.query("d", 0, "").unwrap(), 0.0);
        assert!((p.query("d", 1, "").unwrap() - 5.0).abs() < 1e-12);
        assert!((p.query("d", 2, "").unwrap() - 23.025850929940457).abs() < 1e-9);
        assert!(matches!(p.query("d", 3, ""), Err(IcError::MissingEntry { token_index: 3, .. })));
        assert!(matches!(p.query("other", 0, ""), Err(IcError::MissingEntry { .. })));
    }

    #[test]
    fn external_rejects_bad_probability() {
        let raw = exchange(r#"{"token_index": 0, "probability": 1.5}"#);
        assert!(matches!(
            ExternalIc::parse(&raw, Path::new("ic.json")),
            Err(IcError::ProbabilityOutOfRange { .. })
        ));
        let raw = exchange(r#"{"token_index": 0, "probability": -0.1}"#);
        assert!(ExternalIc::parse(&raw, Path::new("ic.json")).is_err());
    }

    #[test]
    fn external_rejects_foreign_tokenizer() {
        let raw = r#"{"format_version": 1, "tokenizer": "wordpiece", "documents": {}}"#;
        assert!(matches!(
            ExternalIc::parse(raw, Path::new("ic.json")),
            Err(IcError::TokenizerMismatch { .. })
        ));
        let raw = format!(r#"{{"format_version": 7, "tokenizer": "{}", "documents": {{}}}}"#, tokenizer_fingerprint());
        assert!(matches!(
            ExternalIc::parse(&raw, Path::new("ic.json")),
            Err(IcError::UnsupportedVersion { found: 7, .. })
        ));
    }

    proptest! {
        #[test]
        fn ic_is_finite_nonnegative_and_antimonotone(p1 in 0.0f64..=1.0, p2 in 0.0f64..=1.0) {
            let (a, b) = (information_content(p1), information_content(p2));
            prop_assert!(a.is_finite() && a >= 0.0);
            prop_assert!(b.is_finite() && b >= 0.0);
            if p1.max(PROBABILITY_FLOOR) < p2.max(PROBABILITY_FLOOR) {
                prop_assert!(a > b);
            }
        }

        #[test]
        fn unigram_rarer_is_more_informative(a in 1usize..20, b in 1usize..20) {
            let text = format!("{} {}", vec!["x"; a].join(" "), vec!["y"; b].join(" "));
            let m = UnigramIc::from_texts([text.as_str()]);
            let (ix, iy) = (information_content(m.probability("x")), information_content(m.probability("y")));
            if a < b { prop_assert!(ix > iy) } else if a > b { prop_assert!(ix < iy) }
            prop_assert!(ix >= 0.0 && iy >= 0.0);
        }
    }
}
