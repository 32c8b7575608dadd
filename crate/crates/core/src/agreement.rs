//! Inter-annotator agreement.
//!
//! Items are either annotated spans (keyed by exact offsets, start offset
//! only, or whitespace-trimmed offsets) or single characters. At span level
//! an annotator who did not mark a span is missing for that item; at
//! character level every character is an item and unannotated characters
//! carry the label `O`.
//!
//! All three chance-corrected and raw measures are additive over items, so
//! they are computed through [`AgreementAccumulator`], which lets character
//! level statistics stream over a corpus without materializing items.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::Corpus;
use crate::model::{AnnotationSet, AnnotatorId, Document, EntityMention, EntityType, IdentifierType};
use crate::metrics::Score;

/// Label of characters no mention covers.
pub const OUTSIDE: &str = "O";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgreementError {
    #[error("agreement needs at least two annotators{}", .doc_id.as_ref().map(|d| format!(" (document {d})")).unwrap_or_default())]
    FewerThanTwoAnnotators { doc_id: Option<String> },
    #[error("no item is labelled by two or more annotators")]
    NoComparableItems,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationKind {
    EntityType,
    IdentifierType,
    ConfidentialStatus,
}

impl AnnotationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AnnotationKind::EntityType => "entity_type",
            AnnotationKind::IdentifierType => "identifier_type",
            AnnotationKind::ConfidentialStatus => "confidential_status",
        }
    }

    pub const ALL: [AnnotationKind; 3] =
        [AnnotationKind::EntityType, AnnotationKind::IdentifierType, AnnotationKind::ConfidentialStatus];

    pub fn label(self, m: &EntityMention) -> &'static str {
        match self {
            AnnotationKind::EntityType => m.entity_type.as_str(),
            AnnotationKind::IdentifierType => m.identifier_type.as_str(),
            AnnotationKind::ConfidentialStatus => m.confidential_status.as_str(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Span,
    Character,
}

impl Unit {
    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Span => "span",
            Unit::Character => "character",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Start and end offsets must both match.
    Exact,
    /// Only start offsets must match.
    Partial,
    /// Start and end must match after trimming surrounding whitespace.
    Trimmed,
}

impl MatchMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MatchMode::Exact => "exact",
            MatchMode::Partial => "partial",
            MatchMode::Trimmed => "trimmed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ItemKey {
    Span { start: usize, end: Option<usize> },
    Char(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgreementItem {
    pub unit: Unit,
    pub match_mode: MatchMode,
    pub key: ItemKey,
    pub labels: BTreeMap<AnnotatorId, &'static str>,
}

fn require_two(doc: &Document) -> Result<(), AgreementError> {
    if doc.annotations.len() < 2 {
        return Err(AgreementError::FewerThanTwoAnnotators { doc_id: Some(doc.doc_id.clone()) });
    }
    Ok(())
}

fn sorted_mentions(set: &AnnotationSet) -> Vec<&EntityMention> {
    let mut ms: Vec<&EntityMention> = set.mentions.iter().collect();
    ms.sort_by(|a, b| (a.start_offset, a.end_offset, &a.mention_id).cmp(&(b.start_offset, b.end_offset, &b.mention_id)));
    ms
}

fn trimmed_offsets(chars: &[char], m: &EntityMention) -> (usize, usize) {
    let (mut s, mut e) = (m.start_offset.min(chars.len()), m.end_offset.min(chars.len()));
    while s < e && chars[s].is_whitespace() {
        s += 1;
    }
    while e > s && chars[e - 1].is_whitespace() {
        e -= 1;
    }
    (s, e)
}

fn span_key(chars: &[char], m: &EntityMention, mode: MatchMode) -> ItemKey {
    match mode {
        MatchMode::Exact => ItemKey::Span { start: m.start_offset, end: Some(m.end_offset) },
        MatchMode::Partial => ItemKey::Span { start: m.start_offset, end: None },
        MatchMode::Trimmed => {
            let (start, end) = trimmed_offsets(chars, m);
            ItemKey::Span { start, end: Some(end) }
        }
    }
}

/// Span items of `doc`, plus the number of (annotator, key) collisions where
/// an annotator marked several spans under one key; only the first, in
/// offset order, is kept.
fn span_items(doc: &Document, kind: AnnotationKind, mode: MatchMode) -> (Vec<AgreementItem>, u64) {
    let chars: Vec<char> = doc.text.chars().collect();
    let mut by_key: BTreeMap<ItemKey, BTreeMap<AnnotatorId, &'static str>> = BTreeMap::new();
    let mut collisions = 0;
    for (annotator, set) in &doc.annotations {
        for m in sorted_mentions(set) {
            let labels = by_key.entry(span_key(&chars, m, mode)).or_default();
            if labels.contains_key(annotator) {
                collisions += 1;
            } else {
                labels.insert(annotator.clone(), kind.label(m));
            }
        }
    }
    let items = by_key
        .into_iter()
        .map(|(key, labels)| AgreementItem { unit: Unit::Span, match_mode: mode, key, labels })
        .collect();
    (items, collisions)
}

/// Per-annotator character labels; the first mention in offset order wins
/// where an annotator's mentions overlap.
fn character_labels(doc: &Document, kind: AnnotationKind) -> Vec<(AnnotatorId, Vec<&'static str>)> {
    let len = doc.text.chars().count();
    doc.annotations
        .iter()
        .map(|(annotator, set)| {
            let mut labels: Vec<Option<&'static str>> = vec![None; len];
            for m in sorted_mentions(set) {
                for slot in &mut labels[m.start_offset.min(len)..m.end_offset.min(len)] {
                    slot.get_or_insert(kind.label(m));
                }
            }
            (annotator.clone(), labels.into_iter().map(|l| l.unwrap_or(OUTSIDE)).collect())
        })
        .collect()
}

pub fn build_items(
    doc: &Document,
    kind: AnnotationKind,
    unit: Unit,
    mode: MatchMode,
) -> Result<Vec<AgreementItem>, AgreementError> {
    require_two(doc)?;
    Ok(match unit {
        Unit::Span => span_items(doc, kind, mode).0,
        Unit::Character => {
            let per_annotator = character_labels(doc, kind);
            let len = doc.text.chars().count();
            (0..len)
                .map(|i| AgreementItem {
                    unit,
                    match_mode: mode,
                    key: ItemKey::Char(i),
                    labels: per_annotator.iter().map(|(a, l)| (a.clone(), l[i])).collect(),
                })
                .collect()
        }
    })
}

#[derive(Debug, Clone, Default)]
struct FleissStratum {
    items: u64,
    agreement_sum: f64,
    totals: BTreeMap<&'static str, u64>,
}

/// Additive sufficient statistics for AOA, Fleiss' kappa and nominal
/// Krippendorff's alpha.
#[derive(Debug, Clone, Default)]
pub struct AgreementAccumulator {
    aoa_sum: f64,
    comparable_items: u64,
    /// Keyed by the number of raters on the item.
    fleiss: BTreeMap<usize, FleissStratum>,
    coincidence: BTreeMap<(&'static str, &'static str), f64>,
}

impl AgreementAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one item given the labels of the annotators present on it.
    /// Items with fewer than two labels carry no pairable information.
    pub fn add<'l>(&mut self, labels: impl IntoIterator<Item = &'l &'static str>) {
        let mut counts: BTreeMap<&'static str, u64> = BTreeMap::new();
        let mut m = 0u64;
        for l in labels {
            *counts.entry(*l).or_default() += 1;
            m += 1;
        }
        if m < 2 {
            return;
        }
        let agreeing_pairs: u64 = counts.values().map(|&c| c * (c - 1)).sum();
        let pair_share = agreeing_pairs as f64 / (m * (m - 1)) as f64;
        self.aoa_sum += pair_share;
        self.comparable_items += 1;

        let stratum = self.fleiss.entry(m as usize).or_default();
        stratum.items += 1;
        stratum.agreement_sum += pair_share;
        for (c, n) in &counts {
            *stratum.totals.entry(c).or_default() += n;
        }

        let w = 1.0 / (m - 1) as f64;
        for (c, nc) in &counts {
            for (k, nk) in &counts {
                let pairs = if c == k { nc * (nc - 1) } else { nc * nk };
                if pairs > 0 {
                    *self.coincidence.entry((c, k)).or_default() += pairs as f64 * w;
                }
            }
        }
    }

    pub fn add_item(&mut self, item: &AgreementItem) {
        self.add(item.labels.values());
    }

    pub fn comparable_items(&self) -> u64 {
        self.comparable_items
    }

    /// Mean share of agreeing annotator pairs per item.
    pub fn observed_agreement(&self) -> Result<f64, AgreementError> {
        if self.comparable_items == 0 {
            return Err(AgreementError::NoComparableItems);
        }
        Ok(self.aoa_sum / self.comparable_items as f64)
    }

    /// Fleiss' kappa per rater-count stratum, averaged with item weights over
    /// the strata where it is defined.
    pub fn fleiss_kappa(&self) -> Score {
        let mut weighted = 0.0;
        let mut weight = 0u64;
        for (&n, s) in &self.fleiss {
            let p_bar = s.agreement_sum / s.items as f64;
            let total = (s.items * n as u64) as f64;
            let p_e: f64 = s.totals.values().map(|&c| (c as f64 / total).powi(2)).sum();
            if s.totals.len() < 2 {
                continue;
            }
            weighted += s.items as f64 * (p_bar - p_e) / (1.0 - p_e);
            weight += s.items;
        }
        if weight == 0 {
            Score::Undefined
        } else {
            Score::Defined(weighted / weight as f64)
        }
    }

    /// Nominal Krippendorff's alpha from the coincidence matrix.
    pub fn krippendorff_alpha(&self) -> Score {
        let mut marginals: BTreeMap<&str, f64> = BTreeMap::new();
        let mut disagreement = 0.0;
        for (&(c, k), &o) in &self.coincidence {
            *marginals.entry(c).or_default() += o;
            if c != k {
                disagreement += o;
            }
        }
        let n: f64 = marginals.values().sum();
        let sum_sq: f64 = marginals.values().map(|v| v * v).sum();
        let expected = n * n - sum_sq;
        if expected <= 0.0 {
            return Score::Undefined;
        }
        Score::Defined(1.0 - (n - 1.0) * disagreement / expected)
    }
}

fn accumulate(items: &[AgreementItem]) -> AgreementAccumulator {
    let mut acc = AgreementAccumulator::new();
    items.iter().for_each(|i| acc.add_item(i));
    acc
}

pub fn observed_agreement(items: &[AgreementItem]) -> Result<f64, AgreementError> {
    accumulate(items).observed_agreement()
}

pub fn fleiss_kappa(items: &[AgreementItem]) -> Score {
    accumulate(items).fleiss_kappa()
}

pub fn krippendorff_alpha(items: &[AgreementItem]) -> Score {
    accumulate(items).krippendorff_alpha()
}

/// Two-rater Cohen's kappa over paired labels.
pub fn cohen_kappa<L: Eq + std::hash::Hash>(pairs: &[(L, L)]) -> Score {
    if pairs.is_empty() {
        return Score::Undefined;
    }
    let n = pairs.len() as f64;
    let mut first: HashMap<&L, f64> = HashMap::new();
    let mut second: HashMap<&L, f64> = HashMap::new();
    let mut agree = 0.0;
    for (a, b) in pairs {
        *first.entry(a).or_default() += 1.0;
        *second.entry(b).or_default() += 1.0;
        if a == b {
            agree += 1.0;
        }
    }
    let p_o = agree / n;
    let p_e: f64 = first.iter().map(|(c, na)| na / n * second.get(c).copied().unwrap_or(0.0) / n).sum();
    if p_e >= 1.0 {
        return Score::Undefined;
    }
    Score::Defined((p_o - p_e) / (1.0 - p_e))
}

/// Coreference groups as decided by the annotator: shared `entity_id` or an
/// explicit relation. Returns the group index of every mention.
fn coreference_groups(set: &AnnotationSet) -> Vec<usize> {
    let n = set.mentions.len();
    let mut group: Vec<usize> = (0..n).collect();
    fn find(g: &mut [usize], mut x: usize) -> usize {
        while g[x] != x {
            g[x] = g[g[x]];
            x = g[x];
        }
        x
    }
    let mut by_entity: HashMap<&str, usize> = HashMap::new();
    let by_id: HashMap<&str, usize> = set.mentions.iter().enumerate().map(|(i, m)| (m.mention_id.as_str(), i)).collect();
    let mut links: Vec<(usize, usize)> = Vec::new();
    for (i, m) in set.mentions.iter().enumerate() {
        if let Some(&j) = by_entity.get(m.entity_id.as_str()) {
            links.push((i, j));
        } else {
            by_entity.insert(&m.entity_id, i);
        }
    }
    for (a, b) in &set.relations {
        if let (Some(&i), Some(&j)) = (by_id.get(a.as_str()), by_id.get(b.as_str())) {
            links.push((i, j));
        }
    }
    for (i, j) in links {
        let (ri, rj) = (find(&mut group, i), find(&mut group, j));
        group[ri.max(rj)] = ri.min(rj);
    }
    (0..n).map(|i| find(&mut group, i)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationAgreement {
    pub cohen_kappa: Score,
    /// `[[both linked, only first], [only second, neither]]`.
    pub contingency: [[u64; 2]; 2],
    pub mention_pairs: u64,
}

/// Per annotator: span to mention index, and each mention's coreference group.
type SpanGroups = (BTreeMap<(usize, usize), usize>, Vec<usize>);

/// Cohen's kappa on coreference links between mention pairs whose spans
/// both annotators of a pair marked. Documents with more than two
/// annotators contribute every annotator pair.
pub fn cohen_kappa_relations(docs: &[Document]) -> Result<RelationAgreement, AgreementError> {
    let mut pairs: Vec<(bool, bool)> = Vec::new();
    let mut compared = 0;
    for doc in docs.iter().filter(|d| d.annotations.len() >= 2) {
        compared += 1;
        let views: Vec<SpanGroups> = doc
            .annotations
            .values()
            .map(|set| {
                let groups = coreference_groups(set);
                let mut spans = BTreeMap::new();
                for (i, m) in set.mentions.iter().enumerate() {
                    spans.entry((m.start_offset, m.end_offset)).or_insert(groups[i]);
                }
                (spans, groups)
            })
            .collect();
        for a in 0..views.len() {
            for b in a + 1..views.len() {
                let (sa, sb) = (&views[a].0, &views[b].0);
                let shared: Vec<(usize, usize)> = sa.keys().filter(|k| sb.contains_key(*k)).copied().collect();
                for i in 0..shared.len() {
                    for j in i + 1..shared.len() {
                        let la = sa[&shared[i]] == sa[&shared[j]];
                        let lb = sb[&shared[i]] == sb[&shared[j]];
                        pairs.push((la, lb));
                    }
                }
            }
        }
    }
    if compared == 0 {
        return Err(AgreementError::FewerThanTwoAnnotators { doc_id: None });
    }
    let mut contingency = [[0u64; 2]; 2];
    for (a, b) in &pairs {
        contingency[usize::from(!a)][usize::from(!b)] += 1;
    }
    Ok(RelationAgreement { cohen_kappa: cohen_kappa(&pairs), contingency, mention_pairs: pairs.len() as u64 })
}

/// Symmetric label-mismatch counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    fn new(labels: &[&str]) -> Self {
        Self { labels: labels.iter().map(|s| s.to_string()).collect(), counts: vec![vec![0; labels.len()]; labels.len()] }
    }

    fn index(&self, label: &str) -> usize {
        self.labels.iter().position(|l| l == label).expect("known label")
    }

    pub fn get(&self, row: &str, col: &str) -> u64 {
        self.counts[self.index(row)][self.index(col)]
    }

    fn record(&mut self, a: &str, b: &str) {
        let (i, j) = (self.index(a), self.index(b));
        self.counts[i][j] += 1;
        if i != j {
            self.counts[j][i] += 1;
        }
    }

    pub fn total(&self) -> u64 {
        let mut t = 0;
        for i in 0..self.labels.len() {
            for j in i..self.labels.len() {
                t += self.counts[i][j];
            }
        }
        t
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IdentifierDisagreement {
    pub direct_vs_quasi: u64,
    pub direct_vs_no_mask: u64,
    pub quasi_vs_no_mask: u64,
    /// Exactly matching spans given this type by both annotators of a pair.
    pub compared_mentions: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DisagreementTables {
    pub entity_type_confusion: ConfusionMatrix,
    pub identifier_type_by_entity_type: BTreeMap<EntityType, IdentifierDisagreement>,
}

/// Label mismatches on exactly matching spans. A given kind of mismatch on
/// a given span is counted once however many annotator pairs show it.
/// Identifier-type mismatches are only counted where the pair agrees on the
/// entity type, and are attributed to that type.
pub fn disagreement_tables(corpus: &Corpus) -> DisagreementTables {
    let type_labels: Vec<&str> = EntityType::ALL.iter().map(|t| t.as_str()).collect();
    let mut confusion = ConfusionMatrix::new(&type_labels);
    let mut by_type: BTreeMap<EntityType, IdentifierDisagreement> =
        EntityType::ALL.iter().map(|t| (*t, IdentifierDisagreement::default())).collect();

    for doc in corpus.documents.iter().filter(|d| d.annotations.len() >= 2) {
        let firsts: Vec<BTreeMap<(usize, usize), &EntityMention>> = doc
            .annotations
            .values()
            .map(|set| {
                let mut spans = BTreeMap::new();
                for m in sorted_mentions(set) {
                    spans.entry((m.start_offset, m.end_offset)).or_insert(m);
                }
                spans
            })
            .collect();
        let mut type_mismatch: BTreeSet<((usize, usize), EntityType, EntityType)> = BTreeSet::new();
        let mut ident_mismatch: BTreeSet<((usize, usize), EntityType, IdentifierType, IdentifierType)> = BTreeSet::new();
        let mut compared: BTreeSet<((usize, usize), EntityType)> = BTreeSet::new();
        for a in 0..firsts.len() {
            for b in a + 1..firsts.len() {
                for (span, ma) in &firsts[a] {
                    let Some(mb) = firsts[b].get(span) else { continue };
                    if ma.entity_type != mb.entity_type {
                        let (x, y) = (ma.entity_type.min(mb.entity_type), ma.entity_type.max(mb.entity_type));
                        type_mismatch.insert((*span, x, y));
                        continue;
                    }
                    compared.insert((*span, ma.entity_type));
                    if ma.identifier_type != mb.identifier_type {
                        let (x, y) = (
                            ma.identifier_type.min(mb.identifier_type),
                            ma.identifier_type.max(mb.identifier_type),
                        );
                        ident_mismatch.insert((*span, ma.entity_type, x, y));
                    }
                }
            }
        }
        for (_, x, y) in type_mismatch {
            confusion.record(x.as_str(), y.as_str());
        }
        for (_, t) in compared {
            by_type.entry(t).or_default().compared_mentions += 1;
        }
        for (_, t, x, y) in ident_mismatch {
            let e = by_type.entry(t).or_default();
            match (x, y) {
                (IdentifierType::Direct, IdentifierType::Quasi) => e.direct_vs_quasi += 1,
                (IdentifierType::Direct, IdentifierType::NoMask) => e.direct_vs_no_mask += 1,
                (IdentifierType::Quasi, IdentifierType::NoMask) => e.quasi_vs_no_mask += 1,
                _ => unreachable!("ordered distinct identifier types"),
            }
        }
    }
    DisagreementTables { entity_type_confusion: confusion, identifier_type_by_entity_type: by_type }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementRow {
    pub kind: AnnotationKind,
    pub unit: Unit,
    pub match_mode: MatchMode,
    pub comparable_items: u64,
    pub aoa: Score,
    pub fleiss_kappa: Score,
    pub krippendorff_alpha: Score,
}

impl fmt::Display for AgreementRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<20} {:<10} {:<8} items={:<8} AOA={} kappa={} alpha={}",
            self.kind.as_str(),
            self.unit.as_str(),
            self.match_mode.as_str(),
            self.comparable_items,
            self.aoa,
            self.fleiss_kappa,
            self.krippendorff_alpha
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub documents_compared: u64,
    pub rows: Vec<AgreementRow>,
    pub relations: RelationAgreement,
    pub disagreements: DisagreementTables,
    /// Annotator spans dropped because another span of the same annotator
    /// shares the start offset (partial mode).
    pub partial_collisions: u64,
}

/// The (unit, mode) combinations reported for every annotation kind.
pub const REPORTED_LEVELS: [(Unit, MatchMode); 4] = [
    (Unit::Span, MatchMode::Exact),
    (Unit::Span, MatchMode::Partial),
    (Unit::Span, MatchMode::Trimmed),
    (Unit::Character, MatchMode::Exact),
];

pub fn agreement_report(corpus: &Corpus) -> Result<AgreementReport, AgreementError> {
    let docs: Vec<&Document> = corpus.documents.iter().filter(|d| d.annotations.len() >= 2).collect();
    if docs.is_empty() {
        return Err(AgreementError::FewerThanTwoAnnotators { doc_id: None });
    }
    let mut rows = Vec::new();
    let mut partial_collisions = 0;
    for kind in AnnotationKind::ALL {
        for (unit, mode) in REPORTED_LEVELS {
            let mut acc = AgreementAccumulator::new();
            for doc in &docs {
                match unit {
                    Unit::Span => {
                        let (items, collisions) = span_items(doc, kind, mode);
                        if kind == AnnotationKind::EntityType && mode == MatchMode::Partial {
                            partial_collisions += collisions;
                        }
                        items.iter().for_each(|i| acc.add_item(i));
                    }
                    Unit::Character => {
                        let per_annotator = character_labels(doc, kind);
                        let len = per_annotator.first().map_or(0, |(_, l)| l.len());
                        let mut buf = Vec::with_capacity(per_annotator.len());
                        for i in 0..len {
                            buf.clear();
                            buf.extend(per_annotator.iter().map(|(_, l)| l[i]));
                            acc.add(buf.iter());
                        }
                    }
                }
            }
            rows.push(AgreementRow {
                kind,
                unit,
                match_mode: mode,
                comparable_items: acc.comparable_items(),
                aoa: acc.observed_agreement().map_or(Score::Undefined, Score::Defined),
                fleiss_kappa: acc.fleiss_kappa(),
                krippendorff_alpha: acc.krippendorff_alpha(),
            });
        }
    }
    let owned: Vec<Document> = docs.iter().map(|d| (*d).clone()).collect();
    Ok(AgreementReport {
        documents_compared: docs.len() as u64,
        rows,
        relations: cohen_kappa_relations(&owned)?,
        disagreements: disagreement_tables(corpus),
        partial_collisions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConfidentialStatus, EntityType, IdentifierType};

    fn mention(id: &str, start: usize, end: usize, text: &str, t: EntityType) -> EntityMention {
        EntityMention {
            mention_id: id.into(),
            entity_type: t,
            start_offset: start,
            end_offset: end,
            span_text: text.chars().skip(start).take(end - start).collect(),
            identifier_type: IdentifierType::Quasi,
            confidential_status: ConfidentialStatus::NotConfidential,
            entity_id: id.into(),
        }
    }

    fn doc(text: &str, annotators: Vec<Vec<(usize, usize, EntityType)>>) -> Document {
        let mut d = Document::new("d", text);
        for (i, ms) in annotators.into_iter().enumerate() {
            let name = format!("a{i}");
            let mut set = AnnotationSet::new(name.as_str());
            for (j, (s, e, t)) in ms.into_iter().enumerate() {
                set.mentions.push(mention(&format!("{name}_{j}"), s, e, text, t));
            }
            d.annotations.insert(name.as_str().into(), set);
        }
        d
    }

    fn item(labels: &[&'static str]) -> AgreementItem {
        AgreementItem {
            unit: Unit::Span,
            match_mode: MatchMode::Exact,
            key: ItemKey::Char(0),
            labels: labels.iter().enumerate().map(|(i, l)| (AnnotatorId::new(format!("r{i}")), *l)).collect(),
        }
    }

    #[test]
    fn identical_spans_one_item() {
        let text = "Anna lives in Oslo, Norway.";
        let d = doc(text, vec![vec![(0, 4, EntityType::Person)], vec![(0, 4, EntityType::Person)]]);
        let items = build_items(&d, AnnotationKind::EntityType, Unit::Span, MatchMode::Exact).unwrap();
        assert_eq!(items.len(), 1);
        assert_eq!(items[0].labels.values().collect::<Vec<_>>(), [&"PERSON", &"PERSON"]);
    }

    #[test]
    fn partial_vs_exact_keys() {
        let text = "x".repeat(30);
        let d = doc(&text, vec![vec![(10, 20, EntityType::Org)], vec![(10, 25, EntityType::Org)]]);
        let exact = build_items(&d, AnnotationKind::EntityType, Unit::Span, MatchMode::Exact).unwrap();
        let partial = build_items(&d, AnnotationKind::EntityType, Unit::Span, MatchMode::Partial).unwrap();
        assert_eq!(exact.len(), 2);
        assert_eq!(partial.len(), 1);
        assert_eq!(partial[0].labels.len(), 2);
    }

    #[test]
    fn trimmed_mode_ignores_boundary_whitespace() {
        let text = "at  Oslo  now";
        let d = doc(text, vec![vec![(4, 8, EntityType::Loc)], vec![(3, 9, EntityType::Loc)]]);
        assert_eq!(build_items(&d, AnnotationKind::EntityType, Unit::Span, MatchMode::Exact).unwrap().len(), 2);
        assert_eq!(build_items(&d, AnnotationKind::EntityType, Unit::Span, MatchMode::Trimmed).unwrap().len(), 1);
    }

    #[test]
    fn character_items_cover_text() {
        let text = "y".repeat(100);
        let d = doc(&text, vec![vec![(10, 15, EntityType::Person)], vec![]]);
        let items = build_items(&d, AnnotationKind::EntityType, Unit::Character, MatchMode::Exact).unwrap();
        assert_eq!(items.len(), 100);
        let disagreeing: Vec<_> = items
            .iter()
            .filter(|i| i.labels.values().collect::<BTreeSet<_>>().len() > 1)
            .map(|i| i.key)
            .collect();
        assert_eq!(disagreeing, (10..15).map(ItemKey::Char).collect::<Vec<_>>());
        assert!(items.iter().all(|i| i.labels.len() == 2));
        let aoa = observed_agreement(&items).unwrap();
        assert!((aoa - 0.95).abs() < 1e-12);
    }

    #[test]
    fn single_annotator_rejected() {
        let d = doc("abc", vec![vec![]]);
        assert!(matches!(
            build_items(&d, AnnotationKind::EntityType, Unit::Span, MatchMode::Exact),
            Err(AgreementError::FewerThanTwoAnnotators { .. })
        ));
    }

    #[test]
    fn aoa_examples() {
        assert_eq!(observed_agreement(&[item(&["A", "A"]), item(&["B", "B"])]).unwrap(), 1.0);
        assert_eq!(observed_agreement(&[item(&["A", "B"]), item(&["B", "A"])]).unwrap(), 0.0);
        let v = observed_agreement(&[item(&["A", "A"]), item(&["B", "B"]), item(&["A", "B"])]).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(observed_agreement(&[item(&["A"])]), Err(AgreementError::NoComparableItems));
    }

    #[test]
    fn degenerate_single_category() {
        let items = vec![item(&["A", "A"]), item(&["A", "A", "A"])];
        assert_eq!(fleiss_kappa(&items), Score::Undefined);
        assert_eq!(krippendorff_alpha(&items), Score::Undefined);
        assert_eq!(observed_agreement(&items).unwrap(), 1.0);
    }

    #[test]
    fn perfect_agreement() {
        let items = vec![item(&["A", "A"]), item(&["B", "B"]), item(&["A", "A"])];
        assert_eq!(fleiss_kappa(&items), Score::Defined(1.0));
        assert_eq!(krippendorff_alpha(&items), Score::Defined(1.0));
    }

    #[test]
    fn missing_annotator_contributes_nothing() {
        let base = vec![item(&["A", "A"]), item(&["B", "A"]), item(&["B", "B"])];
        let mut with_single = base.clone();
        with_single.push(item(&["B"]));
        assert_eq!(krippendorff_alpha(&base), krippendorff_alpha(&with_single));
    }

    #[test]
    fn cohen_examples() {
        let same = vec![(true, true), (false, false), (true, true)];
        assert_eq!(cohen_kappa(&same), Score::Defined(1.0));
        let opposite = vec![(true, false), (false, true)];
        assert!(cohen_kappa(&opposite).value().unwrap() <= 0.0);
        assert_eq!(cohen_kappa(&[(true, true), (true, true)]), Score::Undefined);
    }

    #[test]
    fn dem_org_mismatch_counted_once() {
        let text = "the naval police said";
        let d = doc(
            text,
            vec![
                vec![(4, 16, EntityType::Dem)],
                vec![(4, 16, EntityType::Org)],
                vec![(4, 16, EntityType::Org)],
            ],
        );
        let t = disagreement_tables(&Corpus::new(vec![d]));
        assert_eq!(t.entity_type_confusion.get("DEM", "ORG"), 1);
        assert_eq!(t.entity_type_confusion.get("ORG", "DEM"), 1);
        assert_eq!(t.entity_type_confusion.total(), 1);
    }

    #[test]
    fn identifier_disagreement_needs_same_type() {
        let text = "Ann and Bo";
        let mut d = doc(text, vec![vec![(0, 3, EntityType::Person), (8, 10, EntityType::Person)], vec![(0, 3, EntityType::Person), (8, 10, EntityType::Org)]]);
        for set in d.annotations.values_mut() {
            if set.annotator.as_str() == "a1" {
                set.mentions[0].identifier_type = IdentifierType::Direct;
                set.mentions[1].identifier_type = IdentifierType::NoMask;
            }
        }
        let t = disagreement_tables(&Corpus::new(vec![d]));
        let p = t.identifier_type_by_entity_type[&EntityType::Person];
        assert_eq!((p.direct_vs_quasi, p.direct_vs_no_mask, p.quasi_vs_no_mask), (1, 0, 0));
        assert_eq!(p.compared_mentions, 1);
        assert_eq!(t.identifier_type_by_entity_type[&EntityType::Org], IdentifierDisagreement::default());
    }

    #[test]
    fn no_multi_annotator_docs_give_empty_tables() {
        let d = doc("abc", vec![vec![(0, 1, EntityType::Misc)]]);
        let t = disagreement_tables(&Corpus::new(vec![d]));
        assert_eq!(t.entity_type_confusion.total(), 0);
        assert!(t.identifier_type_by_entity_type.values().all(|v| *v == IdentifierDisagreement::default()));
    }
}
