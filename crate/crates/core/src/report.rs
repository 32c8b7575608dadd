//! Error analysis and report emission.
//!
//! Reports are deterministic: maps are ordered and every float is written
//! with four decimals, rounding ties to even.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::agreement::{AgreementReport, ConfusionMatrix};
use crate::corpus::Corpus;
use crate::masks::MaskSet;
use crate::metrics::{mask_for, prepare_document, MaskPolicy, MetricsError, MetricsReport, Ratio, Score};
use crate::model::{EntityType, IdentifierType};
use crate::stats::CorpusStats;

pub const REPORT_VERSION: u32 = 1;

/// Maximum number of false-negative examples kept in a breakdown.
pub const SAMPLE_CAP: usize = 25;

/// An `f64` written with exactly four decimals.
#[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd)]
pub struct Fixed4(pub f64);

impl Fixed4 {
    pub fn format(v: f64) -> String {
        format!("{v:.4}")
    }
}

impl Serialize for Fixed4 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_str(&self.0.to_string());
        }
        let raw = serde_json::value::RawValue::from_string(Self::format(self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct FalseNegativeCounts {
    pub false_negative_entities: u64,
    pub total_entities: u64,
    pub proportion: Score,
}

impl FalseNegativeCounts {
    fn record(&mut self, false_negative: bool) {
        self.total_entities += 1;
        self.false_negative_entities += u64::from(false_negative);
    }

    fn finish(&mut self) {
        self.proportion =
            Ratio { numerator: self.false_negative_entities, denominator: self.total_entities }.score();
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FalseNegativeSample {
    pub doc_id: String,
    pub annotator: String,
    pub entity_type: EntityType,
    pub identifier_class: IdentifierType,
    pub mentions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorBreakdown {
    pub per_entity_type: BTreeMap<EntityType, FalseNegativeCounts>,
    pub per_identifier_class: BTreeMap<IdentifierType, FalseNegativeCounts>,
    pub samples: Vec<FalseNegativeSample>,
}

impl Default for ErrorBreakdown {
    fn default() -> Self {
        let mut per_entity_type = BTreeMap::new();
        for t in EntityType::ALL {
            per_entity_type.insert(*t, FalseNegativeCounts::default());
        }
        let mut per_identifier_class = BTreeMap::new();
        per_identifier_class.insert(IdentifierType::Direct, FalseNegativeCounts::default());
        per_identifier_class.insert(IdentifierType::Quasi, FalseNegativeCounts::default());
        Self { per_entity_type, per_identifier_class, samples: Vec::new() }
    }
}

impl ErrorBreakdown {
    pub fn total_false_negatives(&self) -> u64 {
        self.per_entity_type.values().map(|c| c.false_negative_entities).sum()
    }
}

/// Attributes every unprotected direct or quasi identifier entity to its
/// semantic type and identifier class.
pub fn false_negative_breakdown(
    corpus: &Corpus,
    masks: &MaskSet,
    policy: MaskPolicy,
) -> Result<ErrorBreakdown, MetricsError> {
    type Outcome = Vec<(EntityType, IdentifierType, bool, FalseNegativeSample)>;
    let per_doc: Vec<Result<Outcome, MetricsError>> = corpus
        .documents
        .par_iter()
        .filter(|d| d.is_evaluable())
        .map(|doc| {
            let prepared = prepare_document(doc)?;
            let mask = mask_for(doc, &prepared.tokens, masks, policy)?;
            let mut out = Vec::new();
            for view in &prepared.annotators {
                for e in view.entities.direct.iter().chain(&view.entities.quasi) {
                    let fn_ = !e.token_set.is_subset(&mask.masked_tokens);
                    out.push((
                        e.entity_type,
                        e.identifier_class,
                        fn_,
                        FalseNegativeSample {
                            doc_id: doc.doc_id.clone(),
                            annotator: view.annotator.to_string(),
                            entity_type: e.entity_type,
                            identifier_class: e.identifier_class,
                            mentions: e.mentions.iter().map(|m| m.span_text.clone()).collect(),
                        },
                    ));
                }
            }
            Ok(out)
        })
        .collect();

    let mut b = ErrorBreakdown::default();
    for outcome in per_doc {
        for (ty, class, fn_, sample) in outcome? {
            b.per_entity_type.entry(ty).or_default().record(fn_);
            b.per_identifier_class.entry(class).or_default().record(fn_);
            if fn_ && b.samples.len() < SAMPLE_CAP {
                b.samples.push(sample);
            }
        }
    }
    b.per_entity_type.values_mut().for_each(FalseNegativeCounts::finish);
    b.per_identifier_class.values_mut().for_each(FalseNegativeCounts::finish);
    Ok(b)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportBundle {
    pub report_version: u32,
    /// Free-form run description (input paths, IC provider, policy).
    pub inputs: BTreeMap<String, String>,
    pub metrics: MetricsReport,
    pub errors: ErrorBreakdown,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<CorpusStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agreement: Option<AgreementReport>,
}

impl Default for ReportBundle {
    fn default() -> Self {
        Self {
            report_version: REPORT_VERSION,
            inputs: BTreeMap::new(),
            metrics: MetricsReport::from_counts(Default::default()),
            errors: ErrorBreakdown::default(),
            stats: None,
            agreement: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Structured,
    Csv,
}

pub fn to_structured(bundle: &ReportBundle) -> String {
    let mut s = serde_json::to_string_pretty(bundle).expect("report serializes");
    s.push('\n');
    s
}

fn score_cell(s: Score) -> String {
    s.to_string()
}

/// Flat CSV of the metrics and false-negative breakdown:
/// `section,key,numerator,denominator,value`.
pub fn to_csv(bundle: &ReportBundle) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["section", "key", "numerator", "denominator", "value"])?;
    let c = &bundle.metrics.counts;
    for (name, r) in [("er_di", c.er_di), ("er_qi", c.er_qi), ("r_token", c.r_token), ("p_token", c.p_token)] {
        w.write_record(["metric", name, &r.numerator.to_string(), &r.denominator.to_string(), &score_cell(r.score())])?;
    }
    w.write_record([
        "metric",
        "wp",
        &Fixed4::format(c.wp.numerator.0),
        &Fixed4::format(c.wp.denominator.0),
        &score_cell(c.wp.score()),
    ])?;
    for (t, fc) in &bundle.errors.per_entity_type {
        w.write_record([
            "false_negatives_by_type",
            t.as_str(),
            &fc.false_negative_entities.to_string(),
            &fc.total_entities.to_string(),
            &score_cell(fc.proportion),
        ])?;
    }
    for (t, fc) in &bundle.errors.per_identifier_class {
        w.write_record([
            "false_negatives_by_class",
            t.as_str(),
            &fc.false_negative_entities.to_string(),
            &fc.total_entities.to_string(),
            &score_cell(fc.proportion),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

pub fn emit(bundle: &ReportBundle, format: ReportFormat, path: impl AsRef<Path>) -> Result<(), ReportError> {
    let path = path.as_ref();
    let body = match format {
        ReportFormat::Structured => to_structured(bundle),
        ReportFormat::Csv => to_csv(bundle).map_err(|source| ReportError::Csv { path: path.to_path_buf(), source })?,
    };
    fs::write(path, body).map_err(|source| ReportError::Io { path: path.to_path_buf(), source })
}

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    report_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Serialize)]
struct StatsBody<'a> {
    stats: &'a CorpusStats,
}

#[derive(Serialize)]
struct AgreementBody<'a> {
    agreement: &'a AgreementReport,
}

fn versioned<T: Serialize>(body: &T) -> String {
    let mut s = serde_json::to_string_pretty(&Versioned { report_version: REPORT_VERSION, body })
        .expect("report serializes");
    s.push('\n');
    s
}

pub fn stats_to_structured(stats: &CorpusStats) -> String {
    versioned(&StatsBody { stats })
}

/// Corpus statistics as `section,key,value` rows.
pub fn stats_to_csv(stats: &CorpusStats) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["section", "key", "value"])?;
    let totals = [
        ("documents", stats.n_documents),
        ("document_annotations", stats.n_document_annotations),
        ("entities", stats.n_entities),
        ("mentions", stats.n_mentions),
        ("tokens", stats.n_tokens),
        ("direct", stats.n_direct),
        ("quasi", stats.n_quasi),
        ("no_mask", stats.n_no_mask),
    ];
    for (k, v) in totals {
        w.write_record(["total", k, &v.to_string()])?;
    }
    for (t, c) in &stats.per_entity_type {
        for (field, v) in [("mentions", c.mentions), ("direct", c.direct), ("quasi", c.quasi), ("confidential", c.confidential)] {
            w.write_record([&format!("entity_type.{field}"), t.as_str(), &v.to_string()])?;
        }
    }
    for (status, v) in &stats.per_confidential_status {
        w.write_record(["confidential_status", status.as_str(), &v.to_string()])?;
    }
    for (split, c) in &stats.per_split {
        w.write_record(["split.documents", split.as_str(), &c.documents.to_string()])?;
        w.write_record(["split.annotations", split.as_str(), &c.annotations.to_string()])?;
    }
    for (n, docs) in &stats.annotators_per_document {
        w.write_record(["annotators_per_document", &n.to_string(), &docs.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

pub fn agreement_to_structured(report: &AgreementReport) -> String {
    versioned(&AgreementBody { agreement: report })
}

/// Agreement measures as `kind,unit,match_mode,items,aoa,fleiss_kappa,krippendorff_alpha`
/// rows, followed by one row for relation kappa.
pub fn agreement_to_csv(report: &AgreementReport) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["kind", "unit", "match_mode", "items", "aoa", "fleiss_kappa", "krippendorff_alpha"])?;
    for r in &report.rows {
        w.write_record([
            r.kind.as_str().to_string(),
            r.unit.as_str().to_string(),
            r.match_mode.as_str().to_string(),
            r.comparable_items.to_string(),
            score_cell(r.aoa),
            score_cell(r.fleiss_kappa),
            score_cell(r.krippendorff_alpha),
        ])?;
    }
    w.write_record([
        "relations".to_string(),
        "mention_pair".to_string(),
        "exact".to_string(),
        report.relations.mention_pairs.to_string(),
        String::new(),
        score_cell(report.relations.cohen_kappa),
        String::new(),
    ])?;
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

/// Square confusion matrix as CSV, first column holding the row label.
pub fn confusion_to_csv(matrix: &ConfusionMatrix) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![String::new()];
    header.extend(matrix.labels.iter().cloned());
    w.write_record(&header)?;
    for (i, label) in matrix.labels.iter().enumerate() {
        let mut row = vec![label.clone()];
        row.extend(matrix.counts[i].iter().map(u64::to_string));
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

pub fn emit_confusion_csv(matrix: &ConfusionMatrix, path: impl AsRef<Path>) -> Result<(), ReportError> {
    let path = path.as_ref();
    let body = confusion_to_csv(matrix).map_err(|source| ReportError::Csv { path: path.to_path_buf(), source })?;
    fs::write(path, body).map_err(|source| ReportError::Io { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{MetricCounts, WeightedRatio};

    #[test]
    fn four_decimals_half_even() {
        assert_eq!(Fixed4::format(19.0 / 26.0), "0.7308");
        assert_eq!(Fixed4::format(1.0), "1.0000");
        assert_eq!(Fixed4::format(0.4), "0.4000");
        // exact binary ties
        assert_eq!(Fixed4::format(0.03125), "0.0312");
        assert_eq!(Fixed4::format(0.09375), "0.0938");
        assert_eq!(serde_json::to_string(&Fixed4(0.5)).unwrap(), "0.5000");
    }

    #[test]
    fn empty_bundle_is_valid_json() {
        let out = to_structured(&ReportBundle::default());
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["report_version"], 1);
        assert_eq!(v["metrics"]["er_di"], "UNDEFINED");
        assert_eq!(v["errors"]["per_entity_type"]["PERSON"]["false_negative_entities"], 0);
        assert!(to_csv(&ReportBundle::default()).unwrap().starts_with("section,key"));
    }

    #[test]
    fn emission_is_deterministic() {
        let mut b = ReportBundle {
            metrics: MetricsReport::from_counts(MetricCounts {
                wp: WeightedRatio { numerator: Fixed4(19.0), denominator: Fixed4(26.0) },
                ..Default::default()
            }),
            ..Default::default()
        };
        b.inputs.insert("z".into(), "1".into());
        b.inputs.insert("a".into(), "2".into());
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("a.json"), dir.path().join("b.json"));
        emit(&b, ReportFormat::Structured, &p1).unwrap();
        emit(&b, ReportFormat::Structured, &p2).unwrap();
        let (a, bb) = (fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
        assert_eq!(a, bb);
        let text = String::from_utf8(a).unwrap();
        assert!(text.contains("\"wp\": 0.7308"), "{text}");
        assert!(text.find("\"a\"").unwrap() < text.find("\"z\"").unwrap());
    }
}
