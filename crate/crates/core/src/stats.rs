//! Corpus-level counts.

use std::collections::{BTreeMap, HashSet};
use std::ops::AddAssign;

use serde::Serialize;

use crate::corpus::Corpus;
use crate::model::{ConfidentialStatus, EntityType, IdentifierType, Split};
use crate::tokenize::tokenize;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TypeCounts {
    pub mentions: usize,
    pub direct: usize,
    pub quasi: usize,
    pub confidential: usize,
}

impl AddAssign for TypeCounts {
    fn add_assign(&mut self, o: Self) {
        self.mentions += o.mentions;
        self.direct += o.direct;
        self.quasi += o.quasi;
        self.confidential += o.confidential;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SplitCounts {
    pub documents: usize,
    pub annotations: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub n_documents: usize,
    pub n_document_annotations: usize,
    /// Distinct `entity_id` values per (document, annotator), summed.
    pub n_entities: usize,
    pub n_mentions: usize,
    pub n_tokens: usize,
    pub n_direct: usize,
    pub n_quasi: usize,
    pub n_no_mask: usize,
    pub per_entity_type: BTreeMap<EntityType, TypeCounts>,
    pub per_confidential_status: BTreeMap<ConfidentialStatus, usize>,
    pub per_split: BTreeMap<Split, SplitCounts>,
    /// Histogram of annotator counts per document.
    pub annotators_per_document: BTreeMap<usize, usize>,
}

impl CorpusStats {
    /// Field-wise sum, as for the concatenation of two disjoint corpora.
    pub fn merge(&mut self, other: &CorpusStats) {
        self.n_documents += other.n_documents;
        self.n_document_annotations += other.n_document_annotations;
        self.n_entities += other.n_entities;
        self.n_mentions += other.n_mentions;
        self.n_tokens += other.n_tokens;
        self.n_direct += other.n_direct;
        self.n_quasi += other.n_quasi;
        self.n_no_mask += other.n_no_mask;
        for (k, v) in &other.per_entity_type {
            *self.per_entity_type.entry(*k).or_default() += *v;
        }
        for (k, v) in &other.per_confidential_status {
            *self.per_confidential_status.entry(*k).or_default() += v;
        }
        for (k, v) in &other.per_split {
            let e = self.per_split.entry(*k).or_default();
            e.documents += v.documents;
            e.annotations += v.annotations;
        }
        for (k, v) in &other.annotators_per_document {
            *self.annotators_per_document.entry(*k).or_default() += v;
        }
    }

    pub fn percent(part: usize, whole: usize) -> f64 {
        if whole == 0 {
            0.0
        } else {
            100.0 * part as f64 / whole as f64
        }
    }
}

pub fn compute_stats(corpus: &Corpus) -> CorpusStats {
    let mut s = CorpusStats::default();
    for doc in &corpus.documents {
        s.n_documents += 1;
        s.n_document_annotations += doc.annotations.len();
        s.n_tokens += tokenize(&doc.text).len();
        *s.annotators_per_document.entry(doc.annotations.len()).or_default() += 1;
        let split = s.per_split.entry(doc.split).or_default();
        split.documents += 1;
        split.annotations += doc.annotations.len();

        for set in doc.annotations.values() {
            let entities: HashSet<&str> = set.mentions.iter().map(|m| m.entity_id.as_str()).collect();
            s.n_entities += entities.len();
            for m in &set.mentions {
                s.n_mentions += 1;
                let t = s.per_entity_type.entry(m.entity_type).or_default();
                t.mentions += 1;
                match m.identifier_type {
                    IdentifierType::Direct => {
                        t.direct += 1;
                        s.n_direct += 1;
                    }
                    IdentifierType::Quasi => {
                        t.quasi += 1;
                        s.n_quasi += 1;
                    }
                    IdentifierType::NoMask => s.n_no_mask += 1,
                }
                if m.confidential_status != ConfidentialStatus::NotConfidential {
                    t.confidential += 1;
                }
                *s.per_confidential_status.entry(m.confidential_status).or_default() += 1;
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::fixture;

    #[test]
    fn empty_corpus_is_all_zero() {
        assert_eq!(compute_stats(&Corpus::default()), CorpusStats::default());
    }

    #[test]
    fn fixture_counts() {
        let s = compute_stats(&Corpus::new(vec![fixture()]));
        assert_eq!(s.n_documents, 1);
        assert_eq!(s.n_document_annotations, 1);
        assert_eq!(s.n_mentions, 3);
        assert_eq!(s.n_entities, 3);
        assert_eq!(s.n_direct, 2);
        assert_eq!(s.n_quasi, 1);
        // Mr John Doe visited Göteborg . Doe stayed .
        assert_eq!(s.n_tokens, 9);
        let sum: usize = s.per_entity_type.values().map(|t| t.mentions).sum();
        assert_eq!(sum, s.n_mentions);
        let conf: usize = s.per_confidential_status.values().sum();
        assert_eq!(conf, s.n_mentions);
    }

    #[test]
    fn additivity() {
        let mut a = fixture();
        let mut b = fixture();
        b.doc_id = "d2".into();
        b.split = Split::Dev;
        a.split = Split::Train;
        let sa = compute_stats(&Corpus::new(vec![a.clone()]));
        let sb = compute_stats(&Corpus::new(vec![b.clone()]));
        let mut merged = sa.clone();
        merged.merge(&sb);
        assert_eq!(merged, compute_stats(&Corpus::new(vec![a, b])));
    }
}
