//! Privacy and utility metrics against multi-annotator ground truth.
//!
//! Every ratio is a micro-average over (document, annotator) pairs: an
//! annotator contributes only to the documents they annotated.
//!
//! * `ER_di`, `ER_qi`: entity-level recall on direct / quasi identifiers. An
//!   entity counts as protected only if every token of every one of its
//!   mentions is masked.
//! * `R`: token-level recall over the direct and quasi identifier tokens.
//! * `P`: token-level precision, each masked token judged once per annotator.
//! * `WP`: `P` with every masked token weighted by its information content.

use std::fmt;

use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::ic::{IcError, IcProvider};
use crate::linking::{group_entities, identifier_partition, IdentifierPartition, LinkError};
use crate::masks::{MaskSet, SystemMask};
use crate::model::{AnnotatorId, Document};
use crate::report::Fixed4;
use crate::tokenize::{CharIndex, TokenIndexSet, Tokenization};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no system mask for document {doc_id}")]
    MissingMask { doc_id: String },
    #[error("mask for document {doc_id} names token {index} but the document has {len} tokens")]
    MaskOutOfRange { doc_id: String, index: usize, len: usize },
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Ic(#[from] IcError),
}

/// How documents without a mask entry are treated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum MaskPolicy {
    /// A missing entry is an error.
    #[default]
    Strict,
    /// A missing entry masks nothing.
    Lenient,
}

/// A metric value; undefined exactly when its denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Score {
    Defined(f64),
    #[default]
    Undefined,
}

impl Score {
    pub fn value(self) -> Option<f64> {
        match self {
            Score::Defined(v) => Some(v),
            Score::Undefined => None,
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, Score::Defined(_))
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Score::Defined(v) => write!(f, "{v:.4}"),
            Score::Undefined => f.write_str("UNDEFINED"),
        }
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Score::Defined(v) => Fixed4(*v).serialize(s),
            Score::Undefined => s.serialize_str("UNDEFINED"),
        }
    }
}

/// Integer-count ratio.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Ratio {
    pub numerator: u64,
    pub denominator: u64,
}

impl Ratio {
    pub fn score(self) -> Score {
        if self.denominator == 0 {
            Score::Undefined
        } else {
            Score::Defined(self.numerator as f64 / self.denominator as f64)
        }
    }

    fn add(&mut self, o: Ratio) {
        self.numerator += o.numerator;
        self.denominator += o.denominator;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct WeightedRatio {
    pub numerator: Fixed4,
    pub denominator: Fixed4,
}

impl WeightedRatio {
    pub fn score(self) -> Score {
        if self.denominator.0 == 0.0 {
            Score::Undefined
        } else {
            Score::Defined(self.numerator.0 / self.denominator.0)
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct MetricCounts {
    pub er_di: Ratio,
    pub er_qi: Ratio,
    pub r_token: Ratio,
    pub p_token: Ratio,
    pub wp: WeightedRatio,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub er_di: Score,
    pub er_qi: Score,
    pub r_token: Score,
    pub p_token: Score,
    pub wp: Score,
    pub counts: MetricCounts,
}

impl MetricsReport {
    pub fn from_counts(counts: MetricCounts) -> Self {
        Self {
            er_di: counts.er_di.score(),
            er_qi: counts.er_qi.score(),
            r_token: counts.r_token.score(),
            p_token: counts.p_token.score(),
            wp: counts.wp.score(),
            counts,
        }
    }
}

/// One annotator's view of a document, ready for scoring.
#[derive(Debug, Clone)]
pub struct AnnotatorView {
    pub annotator: AnnotatorId,
    pub entities: IdentifierPartition,
    /// Tokens of all direct and quasi identifier entities.
    pub masked_tokens: TokenIndexSet,
}

/// A document's tokenization and every annotator's entities.
#[derive(Debug, Clone)]
pub struct PreparedDocument<'a> {
    pub doc: &'a Document,
    pub tokens: Tokenization,
    pub annotators: Vec<AnnotatorView>,
}

pub fn prepare_document(doc: &Document) -> Result<PreparedDocument<'_>, MetricsError> {
    let tokens = doc.tokenization();
    let mut annotators = Vec::with_capacity(doc.annotations.len());
    for annotator in doc.annotators() {
        let entities = identifier_partition(group_entities(doc, &tokens, annotator)?);
        let mut masked_tokens = TokenIndexSet::new();
        for e in entities.direct.iter().chain(&entities.quasi) {
            masked_tokens.extend_from(&e.token_set);
        }
        annotators.push(AnnotatorView { annotator: annotator.clone(), entities, masked_tokens });
    }
    Ok(PreparedDocument { doc, tokens, annotators })
}

/// The mask for `doc` under `policy`, checked against its tokenization.
pub fn mask_for<'m>(
    doc: &Document,
    tokens: &Tokenization,
    masks: &'m MaskSet,
    policy: MaskPolicy,
) -> Result<std::borrow::Cow<'m, SystemMask>, MetricsError> {
    let mask = match masks.get(&doc.doc_id) {
        Some(m) => std::borrow::Cow::Borrowed(m),
        None if policy == MaskPolicy::Lenient => std::borrow::Cow::Owned(SystemMask::empty(doc.doc_id.clone())),
        None => return Err(MetricsError::MissingMask { doc_id: doc.doc_id.clone() }),
    };
    if let Some(index) = mask.masked_tokens.max().filter(|&i| i >= tokens.len()) {
        return Err(MetricsError::MaskOutOfRange { doc_id: doc.doc_id.clone(), index, len: tokens.len() });
    }
    Ok(mask)
}

#[derive(Debug, Clone, Copy, Default)]
struct DocPartial {
    er_di: Ratio,
    er_qi: Ratio,
    r_token: Ratio,
    p_token: Ratio,
    wp_numerator: f64,
    wp_denominator: f64,
}

fn score_document(
    prepared: &PreparedDocument<'_>,
    mask: &SystemMask,
    ic: Option<&IcProvider>,
) -> Result<DocPartial, MetricsError> {
    let m = &mask.masked_tokens;
    let mut p = DocPartial::default();
    for view in &prepared.annotators {
        for e in &view.entities.direct {
            p.er_di.denominator += 1;
            p.er_di.numerator += u64::from(e.token_set.is_subset(m));
        }
        for e in &view.entities.quasi {
            p.er_qi.denominator += 1;
            p.er_qi.numerator += u64::from(e.token_set.is_subset(m));
        }
        let hit = view.masked_tokens.intersection_len(m) as u64;
        p.r_token.numerator += hit;
        p.r_token.denominator += view.masked_tokens.len() as u64;
        p.p_token.numerator += hit;
        p.p_token.denominator += m.len() as u64;
    }

    if let Some(ic) = ic {
        if !prepared.annotators.is_empty() && !m.is_empty() {
            let chars = CharIndex::new(&prepared.doc.text);
            let mut weights = Vec::with_capacity(m.len());
            for t in m.iter() {
                let (start, end) = prepared.tokens.char_range(t).expect("mask checked against tokenization");
                let w = ic.query(&prepared.doc.doc_id, t, chars.slice(&prepared.doc.text, start, end))?;
                weights.push((t, w));
            }
            let total = pairwise_sum(&weights.iter().map(|(_, w)| *w).collect::<Vec<_>>());
            let per_annotator: Vec<f64> = prepared
                .annotators
                .iter()
                .map(|view| {
                    let hits: Vec<f64> =
                        weights.iter().filter(|(t, _)| view.masked_tokens.contains(*t)).map(|(_, w)| *w).collect();
                    pairwise_sum(&hits)
                })
                .collect();
            p.wp_numerator = pairwise_sum(&per_annotator);
            p.wp_denominator = prepared.annotators.len() as f64 * total;
        }
    }
    Ok(p)
}

/// Order-stable pairwise summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

fn collect_partials(
    corpus: &Corpus,
    masks: &MaskSet,
    policy: MaskPolicy,
    ic: Option<&IcProvider>,
) -> Result<Vec<DocPartial>, MetricsError> {
    let results: Vec<Result<DocPartial, MetricsError>> = corpus
        .documents
        .par_iter()
        .filter(|d| d.is_evaluable())
        .map(|doc| {
            let prepared = prepare_document(doc)?;
            let mask = mask_for(doc, &prepared.tokens, masks, policy)?;
            score_document(&prepared, &mask, ic)
        })
        .collect();
    results.into_iter().collect()
}

fn reduce(partials: &[DocPartial]) -> MetricCounts {
    let mut c = MetricCounts::default();
    for p in partials {
        c.er_di.add(p.er_di);
        c.er_qi.add(p.er_qi);
        c.r_token.add(p.r_token);
        c.p_token.add(p.p_token);
    }
    c.wp = WeightedRatio {
        numerator: Fixed4(pairwise_sum(&partials.iter().map(|p| p.wp_numerator).collect::<Vec<_>>())),
        denominator: Fixed4(pairwise_sum(&partials.iter().map(|p| p.wp_denominator).collect::<Vec<_>>())),
    };
    c
}

pub fn entity_recall_direct(corpus: &Corpus, masks: &MaskSet, policy: MaskPolicy) -> Result<Ratio, MetricsError> {
    Ok(reduce(&collect_partials(corpus, masks, policy, None)?).er_di)
}

pub fn entity_recall_quasi(corpus: &Corpus, masks: &MaskSet, policy: MaskPolicy) -> Result<Ratio, MetricsError> {
    Ok(reduce(&collect_partials(corpus, masks, policy, None)?).er_qi)
}

pub fn token_recall(corpus: &Corpus, masks: &MaskSet, policy: MaskPolicy) -> Result<Ratio, MetricsError> {
    Ok(reduce(&collect_partials(corpus, masks, policy, None)?).r_token)
}

pub fn token_precision(corpus: &Corpus, masks: &MaskSet, policy: MaskPolicy) -> Result<Ratio, MetricsError> {
    Ok(reduce(&collect_partials(corpus, masks, policy, None)?).p_token)
}

pub fn weighted_precision(
    corpus: &Corpus,
    masks: &MaskSet,
    policy: MaskPolicy,
    ic: &IcProvider,
) -> Result<WeightedRatio, MetricsError> {
    Ok(reduce(&collect_partials(corpus, masks, policy, Some(ic))?).wp)
}

/// All five metrics in one pass.
pub fn evaluate(
    corpus: &Corpus,
    masks: &MaskSet,
    policy: MaskPolicy,
    ic: &IcProvider,
) -> Result<MetricsReport, MetricsError> {
    Ok(MetricsReport::from_counts(reduce(&collect_partials(corpus, masks, policy, Some(ic))?)))
}
