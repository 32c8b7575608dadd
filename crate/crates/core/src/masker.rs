//! Rule-based baseline masker.
//!
//! Recognizers propose candidate spans; overlaps are resolved by keeping the
//! longest span, then the earlier recognizer in configuration order, then the
//! earlier start. The surviving spans become both predicted mentions and a
//! [`SystemMask`].

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::masks::{MaskSet, SystemMask};
use crate::model::{ConfidentialStatus, Document, EntityMention, EntityType, IdentifierType};
use crate::tokenize::{AlignError, CharIndex};

const SEED_COUNTRIES: &str = include_str!("../data/gazetteers/countries.txt");
const SEED_CITIES: &str = include_str!("../data/gazetteers/cities.txt");
const SEED_NATIONALITIES: &str = include_str!("../data/gazetteers/nationalities.txt");

const MONTHS: &str = "January|February|March|April|May|June|July|August|September|October|November|December";
const CURRENCY_CODES: &str = "EUR|USD|GBP|CHF|SEK|NOK|DKK|TRY|RUB|PLN";

#[derive(Debug, Error)]
pub enum MaskerError {
    #[error("gazetteer {path}: {source}")]
    GazetteerLoad {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("minimum digit-run length must be at least 1")]
    InvalidDigitRun,
    #[error("recognizer {0:?} listed more than once")]
    DuplicateRecognizer(RecognizerKind),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ApplyMaskError {
    #[error("spans [{0}, {1}) and [{2}, {3}) overlap")]
    OverlappingSpans(usize, usize, usize, usize),
    #[error(transparent)]
    Align(#[from] AlignError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecognizerKind {
    CaseNumber,
    Honorific,
    Date,
    Currency,
    DigitRun,
    Gazetteer,
}

impl RecognizerKind {
    pub const DEFAULT_ORDER: [RecognizerKind; 6] = [
        RecognizerKind::CaseNumber,
        RecognizerKind::Honorific,
        RecognizerKind::Date,
        RecognizerKind::Currency,
        RecognizerKind::DigitRun,
        RecognizerKind::Gazetteer,
    ];
}

/// An extra gazetteer file and the entity type its entries receive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GazetteerSource {
    pub path: PathBuf,
    #[serde(default = "default_gazetteer_type")]
    pub entity_type: EntityType,
}

fn default_gazetteer_type() -> EntityType {
    EntityType::Loc
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskerConfig {
    /// Enabled recognizers; the order breaks ties between equally long spans.
    pub recognizers: Vec<RecognizerKind>,
    pub min_digits: usize,
    pub seed_gazetteers: bool,
    pub gazetteers: Vec<GazetteerSource>,
}

impl Default for MaskerConfig {
    fn default() -> Self {
        Self {
            recognizers: RecognizerKind::DEFAULT_ORDER.to_vec(),
            min_digits: 4,
            seed_gazetteers: true,
            gazetteers: Vec::new(),
        }
    }
}

/// Entries of a gazetteer file: one per line, blank lines and lines starting
/// with `#` ignored.
pub fn parse_gazetteer(raw: &str) -> impl Iterator<Item = &str> {
    raw.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'))
}

pub fn load_gazetteer(path: &Path) -> Result<Vec<String>, MaskerError> {
    let raw =
        fs::read_to_string(path).map_err(|source| MaskerError::GazetteerLoad { path: path.to_path_buf(), source })?;
    Ok(parse_gazetteer(&raw).map(str::to_string).collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Detection {
    pub start: usize,
    pub end: usize,
    pub entity_type: EntityType,
    pub identifier_type: IdentifierType,
    pub recognizer: RecognizerKind,
}

struct Gazetteer {
    pattern: Regex,
    types: BTreeMap<String, EntityType>,
}

/// A compiled masker. Stateless after construction and shareable across threads.
pub struct Masker {
    order: Vec<RecognizerKind>,
    case_number: Regex,
    honorific: Regex,
    dates: Vec<Regex>,
    currency: Regex,
    digit_run: Regex,
    gazetteer: Option<Gazetteer>,
}

impl Masker {
    pub fn new(config: &MaskerConfig) -> Result<Self, MaskerError> {
        if config.min_digits == 0 {
            return Err(MaskerError::InvalidDigitRun);
        }
        for (i, r) in config.recognizers.iter().enumerate() {
            if config.recognizers[..i].contains(r) {
                return Err(MaskerError::DuplicateRecognizer(*r));
            }
        }
        let mut entries: BTreeMap<String, EntityType> = BTreeMap::new();
        if config.seed_gazetteers {
            for (raw, t) in
                [(SEED_COUNTRIES, EntityType::Loc), (SEED_CITIES, EntityType::Loc), (SEED_NATIONALITIES, EntityType::Dem)]
            {
                for e in parse_gazetteer(raw) {
                    entries.entry(e.to_string()).or_insert(t);
                }
            }
        }
        for source in &config.gazetteers {
            for e in load_gazetteer(&source.path)? {
                entries.entry(e).or_insert(source.entity_type);
            }
        }
        let gazetteer = (!entries.is_empty()).then(|| {
            let mut alts: Vec<&String> = entries.keys().collect();
            alts.sort_by(|a, b| b.chars().count().cmp(&a.chars().count()).then(a.cmp(b)));
            let body = alts.iter().map(|a| regex::escape(a)).collect::<Vec<_>>().join("|");
            Gazetteer { pattern: Regex::new(&format!(r"\b(?:{body})\b")).expect("escaped alternation"), types: entries }
        });

        Ok(Self {
            order: config.recognizers.clone(),
            case_number: Regex::new(r"(?i)\bno\.\s*(\d+(?:/\d+)+)").unwrap(),
            honorific: Regex::new(r"\b(?:Mr|Mrs|Ms|Dr)\.?\s+\p{Lu}[\p{L}'\-]*(?:\s+\p{Lu}[\p{L}'\-]*)*").unwrap(),
            dates: vec![
                Regex::new(&format!(r"\b\d{{1,2}}\s+(?:{MONTHS})\s+\d{{4}}\b")).unwrap(),
                Regex::new(&format!(r"\b(?:{MONTHS})\s+\d{{1,2}},?\s+\d{{4}}\b")).unwrap(),
                Regex::new(r"\b(?:1[89]|20)\d{2}\b").unwrap(),
            ],
            currency: Regex::new(&format!(
                r"[€$£]\s?\d(?:[\d,.]*\d)?|\b(?:{CURRENCY_CODES})\s?\d(?:[\d,.]*\d)?|\b\d(?:[\d,.]*\d)?\s?(?:{CURRENCY_CODES}|euros?|dollars?|pounds?|kroner|kronor|francs?)\b"
            ))
            .unwrap(),
            digit_run: Regex::new(&format!(r"\d{{{},}}", config.min_digits)).unwrap(),
            gazetteer,
        })
    }

    fn candidates(&self, text: &str, kind: RecognizerKind, out: &mut Vec<(usize, usize, EntityType, IdentifierType)>) {
        use EntityType::*;
        use IdentifierType::*;
        match kind {
            RecognizerKind::CaseNumber => {
                for c in self.case_number.captures_iter(text) {
                    let m = c.get(1).expect("group");
                    out.push((m.start(), m.end(), Code, Direct));
                }
            }
            RecognizerKind::Honorific => {
                out.extend(self.honorific.find_iter(text).map(|m| (m.start(), m.end(), Person, Direct)));
            }
            RecognizerKind::Date => {
                for re in &self.dates {
                    out.extend(re.find_iter(text).map(|m| (m.start(), m.end(), Datetime, Quasi)));
                }
            }
            RecognizerKind::Currency => {
                out.extend(self.currency.find_iter(text).map(|m| (m.start(), m.end(), Quantity, Quasi)));
            }
            RecognizerKind::DigitRun => {
                out.extend(self.digit_run.find_iter(text).map(|m| (m.start(), m.end(), Code, Quasi)));
            }
            RecognizerKind::Gazetteer => {
                if let Some(g) = &self.gazetteer {
                    out.extend(g.pattern.find_iter(text).map(|m| (m.start(), m.end(), g.types[m.as_str()], Quasi)));
                }
            }
        }
    }

    /// Non-overlapping detections in `text`, ordered by start offset.
    /// Offsets are code points.
    pub fn detect(&self, text: &str) -> Vec<Detection> {
        let index = CharIndex::new(text);
        let mut all = Vec::new();
        for (rank, &kind) in self.order.iter().enumerate() {
            let mut found = Vec::new();
            self.candidates(text, kind, &mut found);
            for (bs, be, entity_type, identifier_type) in found {
                let (start, end) = (index.char_of_byte(bs), index.char_of_byte(be));
                if start < end {
                    all.push((rank, Detection { start, end, entity_type, identifier_type, recognizer: kind }));
                }
            }
        }
        all.sort_by(|(ra, a), (rb, b)| {
            (b.end - b.start).cmp(&(a.end - a.start)).then(ra.cmp(rb)).then(a.start.cmp(&b.start))
        });
        let mut kept: Vec<Detection> = Vec::new();
        for (_, d) in all {
            if kept.iter().all(|k| d.end <= k.start || k.end <= d.start) {
                kept.push(d);
            }
        }
        kept.sort_by_key(|d| (d.start, d.end));
        kept
    }

    /// Predicted mentions and the resulting mask for one document.
    pub fn run(&self, doc: &Document) -> (SystemMask, Vec<EntityMention>) {
        let detections = self.detect(&doc.text);
        let index = CharIndex::new(&doc.text);
        let mentions: Vec<EntityMention> = detections
            .iter()
            .enumerate()
            .map(|(i, d)| EntityMention {
                mention_id: format!("{}_m{i}", doc.doc_id),
                entity_type: d.entity_type,
                start_offset: d.start,
                end_offset: d.end,
                span_text: index.slice(&doc.text, d.start, d.end).to_string(),
                identifier_type: d.identifier_type,
                confidential_status: ConfidentialStatus::NotConfidential,
                entity_id: format!("{}_e{i}", doc.doc_id),
            })
            .collect();
        let spans = detections.iter().map(|d| (d.start, d.end)).collect();
        let mask = SystemMask::from_spans(doc.doc_id.clone(), &doc.tokenization(), spans)
            .expect("detections lie within the text");
        (mask, mentions)
    }
}

pub fn run_masker(doc: &Document, config: &MaskerConfig) -> Result<(SystemMask, Vec<EntityMention>), MaskerError> {
    Ok(Masker::new(config)?.run(doc))
}

/// Masks for every document of a corpus.
pub fn mask_corpus(corpus: &crate::corpus::Corpus, masker: &Masker) -> MaskSet {
    use rayon::prelude::*;
    let masks: Vec<SystemMask> = corpus.documents.par_iter().map(|d| masker.run(d).0).collect();
    masks.into_iter().map(|m| (m.doc_id.clone(), m)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "style", content = "placeholder")]
pub enum MaskStyle {
    /// Every masked character becomes `*`.
    Stars,
    /// The span becomes `[TYPE]`.
    CategoryTag,
    /// The span becomes the given placeholder.
    FixedToken(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskSpan {
    pub start: usize,
    pub end: usize,
    /// Shown by the category-tag style; untyped spans become `[MASKED]`.
    pub entity_type: Option<EntityType>,
}

impl MaskSpan {
    pub fn untyped(start: usize, end: usize) -> Self {
        Self { start, end, entity_type: None }
    }
}

/// Merges overlapping or touching spans; the merged span keeps the type of
/// its longest constituent (earliest on ties).
pub fn merge_overlapping(mut spans: Vec<MaskSpan>) -> Vec<MaskSpan> {
    spans.sort_by_key(|s| (s.start, s.end));
    let mut out: Vec<(MaskSpan, usize)> = Vec::new();
    for s in spans {
        match out.last_mut() {
            Some((last, longest)) if s.start < last.end => {
                if s.end - s.start > *longest {
                    *longest = s.end - s.start;
                    last.entity_type = s.entity_type;
                }
                last.end = last.end.max(s.end);
            }
            _ => out.push((s, s.end - s.start)),
        }
    }
    out.into_iter().map(|(s, _)| s).collect()
}

/// Rewrites `text` with every span replaced according to `style`. Text
/// outside the spans is copied unchanged.
pub fn apply_mask(text: &str, spans: &[MaskSpan], style: &MaskStyle) -> Result<String, ApplyMaskError> {
    let index = CharIndex::new(text);
    let mut sorted = spans.to_vec();
    sorted.sort_by_key(|s| (s.start, s.end));
    for s in &sorted {
        if s.start > s.end || s.end > index.char_len() {
            return Err(AlignError::MentionOutsideText { start: s.start, end: s.end, len: index.char_len() }.into());
        }
    }
    for w in sorted.windows(2) {
        if w[1].start < w[0].end {
            return Err(ApplyMaskError::OverlappingSpans(w[0].start, w[0].end, w[1].start, w[1].end));
        }
    }
    let mut out = String::with_capacity(text.len());
    let mut pos = 0;
    for s in &sorted {
        out.push_str(index.slice(text, pos, s.start));
        match style {
            MaskStyle::Stars => out.extend(std::iter::repeat_n('*', s.end - s.start)),
            MaskStyle::CategoryTag => {
                out.push('[');
                out.push_str(s.entity_type.map_or("MASKED", EntityType::as_str));
                out.push(']');
            }
            MaskStyle::FixedToken(p) => out.push_str(p),
        }
        pos = s.end;
    }
    out.push_str(index.slice(text, pos, index.char_len()));
    Ok(out)
}

/// Character spans of a system mask: its own spans when known, token
/// ranges otherwise. Overlaps are merged.
pub fn system_mask_spans(doc: &Document, mask: &SystemMask) -> Vec<MaskSpan> {
    let spans = match &mask.masked_spans {
        Some(spans) => spans.iter().filter(|(s, e)| s < e).map(|&(s, e)| MaskSpan::untyped(s, e)).collect(),
        None => {
            let tokens = doc.tokenization();
            mask.masked_tokens
                .iter()
                .filter_map(|t| tokens.char_range(t))
                .map(|(s, e)| MaskSpan::untyped(s, e))
                .collect()
        }
    };
    merge_overlapping(spans)
}

/// Spans every annotator of `doc` marked DIRECT or QUASI, merged.
pub fn annotator_mask_spans(doc: &Document) -> Vec<MaskSpan> {
    let spans = doc
        .annotations
        .values()
        .flat_map(|set| &set.mentions)
        .filter(|m| m.identifier_type.needs_masking() && m.start_offset < m.end_offset)
        .map(|m| MaskSpan { start: m.start_offset, end: m.end_offset, entity_type: Some(m.entity_type) })
        .collect();
    merge_overlapping(spans)
}
