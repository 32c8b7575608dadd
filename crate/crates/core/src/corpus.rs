//! Reading and writing standoff-annotated corpora.
//!
//! The on-disk layout is a JSON object mapping each `doc_id` to a record:
//!
//! ```text
//! {
//!   "<doc_id>": {
//!     "text": "...",
//!     "dataset_type": "train" | "dev" | "test",        (optional)
//!     "task": "...",                                   (optional)
//!     "annotations": {
//!       "<annotator_id>": {
//!         "entity_mentions": [
//!           { "entity_type", "entity_mention_id", "start_offset", "end_offset",
//!             "span_text", "identifier_type", "confidential_status", "entity_id" }
//!         ],
//!         "relations": [["<mention_id>", "<mention_id>"], ...]   (optional)
//!       }
//!     }
//!   }
//! }
//! ```
//!
//! A JSON array of records each carrying a `doc_id` field is accepted as well,
//! as is a directory of such files. Unknown record fields are ignored.

use std::cell::Cell;
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::{self, DeserializeSeed, MapAccess, SeqAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::model::{
    validate, AnnotationSet, AnnotatorId, ConfidentialStatus, Document, EntityMention, EntityType,
    IdentifierType, Split, Violation,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed JSON in record {record} at byte {byte} (line {line}, column {column}): {message}")]
    Parse { path: PathBuf, record: usize, byte: usize, line: usize, column: usize, message: String },
    #[error("{path}: {field_path}: {message}")]
    Schema { path: PathBuf, field_path: String, message: String },
    #[error("{path}: duplicate doc_id {doc_id:?}")]
    DuplicateDocId { path: PathBuf, doc_id: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub source_path: String,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Self {
        Self { documents, source_path: String::new() }
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.doc_id == doc_id)
    }

    /// Keeps only documents whose split is in `splits`.
    pub fn retain_splits(&mut self, splits: &[Split]) {
        self.documents.retain(|d| splits.contains(&d.split));
    }
}

/// Documents that loaded but failed validation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub invalid: Vec<(String, Vec<Violation>)>,
}

impl LoadReport {
    pub fn is_clean(&self) -> bool {
        self.invalid.is_empty()
    }

    pub fn violation_count(&self) -> usize {
        self.invalid.iter().map(|(_, v)| v.len()).sum()
    }
}

/// Loads a corpus file, or every `*.json` file of a directory in name order.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<(Corpus, LoadReport), CorpusError> {
    let path = path.as_ref();
    let files = if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        files
    } else {
        vec![path.to_path_buf()]
    };

    let mut documents = Vec::new();
    let mut seen = HashSet::new();
    for file in &files {
        let raw = fs::read_to_string(file)
            .map_err(|source| CorpusError::Io { path: file.clone(), source })?;
        for doc in parse_corpus_str(&raw, file)? {
            if !seen.insert(doc.doc_id.clone()) {
                return Err(CorpusError::DuplicateDocId { path: file.clone(), doc_id: doc.doc_id });
            }
            documents.push(doc);
        }
    }

    let invalid: Vec<_> = documents
        .par_iter()
        .filter_map(|d| {
            let v = validate(d);
            (!v.is_empty()).then(|| (d.doc_id.clone(), v))
        })
        .collect();
    let corpus = Corpus { documents, source_path: path.display().to_string() };
    Ok((corpus, LoadReport { invalid }))
}

/// Parses corpus JSON held in memory. `origin` is only used in errors.
pub fn parse_corpus_str(raw: &str, origin: &Path) -> Result<Vec<Document>, CorpusError> {
    let progress = Cell::new(0usize);
    let mut de = serde_json::Deserializer::from_str(raw);
    let records = RecordsSeed { progress: &progress }
        .deserialize(&mut de)
        .and_then(|r| de.end().map(|_| r))
        .map_err(|e| parse_error(raw, origin, progress.get(), &e))?;

    let mut seen = HashSet::new();
    let mut docs = Vec::with_capacity(records.len());
    for (index, (key, value)) in records.into_iter().enumerate() {
        let doc = match key {
            Some(doc_id) => {
                let path = format!("$[{}]", json_quote(&doc_id));
                record_to_document(doc_id, &value, &path, origin)?
            }
            None => {
                let path = format!("$[{index}]");
                let obj = as_object(&value, &path, origin)?;
                let doc_id = get_str(obj, "doc_id", &path, origin)?.to_string();
                record_to_document(doc_id, &value, &path, origin)?
            }
        };
        if !seen.insert(doc.doc_id.clone()) {
            return Err(CorpusError::DuplicateDocId { path: origin.to_path_buf(), doc_id: doc.doc_id });
        }
        docs.push(doc);
    }
    Ok(docs)
}

fn parse_error(raw: &str, origin: &Path, record: usize, e: &serde_json::Error) -> CorpusError {
    let (line, column) = (e.line(), e.column());
    let byte = raw
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum::<usize>()
        + column.saturating_sub(1);
    CorpusError::Parse {
        path: origin.to_path_buf(),
        record,
        byte: byte.min(raw.len()),
        line,
        column,
        message: e.to_string(),
    }
}

type RawRecords = Vec<(Option<String>, Value)>;

/// Deserializes the top-level collection one record at a time so a syntax
/// error can be attributed to the record that contains it.
struct RecordsSeed<'c> {
    progress: &'c Cell<usize>,
}

impl<'de> DeserializeSeed<'de> for RecordsSeed<'_> {
    type Value = RawRecords;

    fn deserialize<D: de::Deserializer<'de>>(self, deserializer: D) -> Result<RawRecords, D::Error> {
        deserializer.deserialize_any(self)
    }
}

impl<'de> Visitor<'de> for RecordsSeed<'_> {
    type Value = RawRecords;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("an object of doc_id -> record or an array of records")
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<RawRecords, A::Error> {
        let mut out = Vec::new();
        while let Some(v) = seq.next_element::<Value>()? {
            out.push((None, v));
            self.progress.set(out.len());
        }
        Ok(out)
    }

    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<RawRecords, A::Error> {
        let mut out = Vec::new();
        while let Some(k) = map.next_key::<String>()? {
            let v = map.next_value::<Value>()?;
            out.push((Some(k), v));
            self.progress.set(out.len());
        }
        Ok(out)
    }
}

fn json_quote(s: &str) -> String {
    serde_json::to_string(s).unwrap_or_else(|_| format!("{s:?}"))
}

fn schema(origin: &Path, field_path: String, message: impl Into<String>) -> CorpusError {
    CorpusError::Schema { path: origin.to_path_buf(), field_path, message: message.into() }
}

fn as_object<'v>(v: &'v Value, path: &str, origin: &Path) -> Result<&'v Map<String, Value>, CorpusError> {
    v.as_object().ok_or_else(|| schema(origin, path.to_string(), "expected an object"))
}

fn get<'v>(obj: &'v Map<String, Value>, field: &str, path: &str, origin: &Path) -> Result<&'v Value, CorpusError> {
    obj.get(field)
        .ok_or_else(|| schema(origin, format!("{path}.{field}"), "missing required field"))
}

fn get_str<'v>(obj: &'v Map<String, Value>, field: &str, path: &str, origin: &Path) -> Result<&'v str, CorpusError> {
    get(obj, field, path, origin)?
        .as_str()
        .ok_or_else(|| schema(origin, format!("{path}.{field}"), "expected a string"))
}

fn get_opt_str<'v>(
    obj: &'v Map<String, Value>,
    field: &str,
    path: &str,
    origin: &Path,
) -> Result<Option<&'v str>, CorpusError> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(_) => Err(schema(origin, format!("{path}.{field}"), "expected a string")),
    }
}

fn get_offset(obj: &Map<String, Value>, field: &str, path: &str, origin: &Path) -> Result<usize, CorpusError> {
    get(obj, field, path, origin)?
        .as_u64()
        .map(|n| n as usize)
        .ok_or_else(|| schema(origin, format!("{path}.{field}"), "expected a non-negative integer"))
}

fn get_label<T: std::str::FromStr<Err = crate::model::UnknownLabel>>(
    obj: &Map<String, Value>,
    field: &str,
    path: &str,
    origin: &Path,
) -> Result<T, CorpusError> {
    get_str(obj, field, path, origin)?
        .parse()
        .map_err(|e: crate::model::UnknownLabel| schema(origin, format!("{path}.{field}"), e.to_string()))
}

fn record_to_document(doc_id: String, value: &Value, path: &str, origin: &Path) -> Result<Document, CorpusError> {
    let obj = as_object(value, path, origin)?;
    let text = get_str(obj, "text", path, origin)?.to_string();
    let split = match get_opt_str(obj, "dataset_type", path, origin)? {
        Some(s) => s
            .parse::<Split>()
            .map_err(|e| schema(origin, format!("{path}.dataset_type"), e.to_string()))?,
        None => Split::Unassigned,
    };
    let person_to_protect = get_opt_str(obj, "task", path, origin)?.map(str::to_string);

    let ann_path = format!("{path}.annotations");
    let annotations = get(obj, "annotations", path, origin)?
        .as_object()
        .ok_or_else(|| schema(origin, ann_path.clone(), "expected an object"))?;
    let mut sets = BTreeMap::new();
    for (annotator, set_value) in annotations {
        let set_path = format!("{ann_path}[{}]", json_quote(annotator));
        let set_obj = as_object(set_value, &set_path, origin)?;
        let mentions_path = format!("{set_path}.entity_mentions");
        let mentions = get(set_obj, "entity_mentions", &set_path, origin)?
            .as_array()
            .ok_or_else(|| schema(origin, mentions_path.clone(), "expected an array"))?;
        let mut set = AnnotationSet::new(annotator.as_str());
        for (i, m) in mentions.iter().enumerate() {
            let mp = format!("{mentions_path}[{i}]");
            let mo = as_object(m, &mp, origin)?;
            set.mentions.push(EntityMention {
                mention_id: get_str(mo, "entity_mention_id", &mp, origin)?.to_string(),
                entity_type: get_label::<EntityType>(mo, "entity_type", &mp, origin)?,
                start_offset: get_offset(mo, "start_offset", &mp, origin)?,
                end_offset: get_offset(mo, "end_offset", &mp, origin)?,
                span_text: get_str(mo, "span_text", &mp, origin)?.to_string(),
                identifier_type: get_label::<IdentifierType>(mo, "identifier_type", &mp, origin)?,
                confidential_status: get_label::<ConfidentialStatus>(mo, "confidential_status", &mp, origin)?,
                entity_id: get_str(mo, "entity_id", &mp, origin)?.to_string(),
            });
        }
        if let Some(rel) = set_obj.get("relations") {
            let rel_path = format!("{set_path}.relations");
            let rel = rel
                .as_array()
                .ok_or_else(|| schema(origin, rel_path.clone(), "expected an array"))?;
            for (i, pair) in rel.iter().enumerate() {
                let pair_path = format!("{rel_path}[{i}]");
                match pair.as_array().map(Vec::as_slice) {
                    Some([Value::String(a), Value::String(b)]) => set.relations.push((a.clone(), b.clone())),
                    _ => return Err(schema(origin, pair_path, "expected a pair of mention ids")),
                }
            }
        }
        sets.insert(AnnotatorId::new(annotator.as_str()), set);
    }

    Ok(Document { doc_id, text, split, person_to_protect, annotations: sets })
}

#[derive(Serialize)]
struct MentionOut<'a> {
    entity_type: EntityType,
    entity_mention_id: &'a str,
    start_offset: usize,
    end_offset: usize,
    span_text: &'a str,
    identifier_type: IdentifierType,
    confidential_status: ConfidentialStatus,
    entity_id: &'a str,
}

#[derive(Serialize)]
struct AnnotationOut<'a> {
    entity_mentions: Vec<MentionOut<'a>>,
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    relations: &'a [(String, String)],
}

#[derive(Serialize)]
struct RecordOut<'a> {
    text: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    dataset_type: Option<Split>,
    #[serde(skip_serializing_if = "Option::is_none")]
    task: Option<&'a str>,
    annotations: BTreeMap<&'a str, AnnotationOut<'a>>,
}

struct DocumentsOut<'a>(&'a [Document]);

impl Serialize for DocumentsOut<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for doc in self.0 {
            let annotations = doc
                .annotations
                .iter()
                .map(|(k, set)| {
                    let entity_mentions = set
                        .mentions
                        .iter()
                        .map(|m| MentionOut {
                            entity_type: m.entity_type,
                            entity_mention_id: &m.mention_id,
                            start_offset: m.start_offset,
                            end_offset: m.end_offset,
                            span_text: &m.span_text,
                            identifier_type: m.identifier_type,
                            confidential_status: m.confidential_status,
                            entity_id: &m.entity_id,
                        })
                        .collect();
                    (k.as_str(), AnnotationOut { entity_mentions, relations: &set.relations })
                })
                .collect();
            let record = RecordOut {
                text: &doc.text,
                dataset_type: (doc.split != Split::Unassigned).then_some(doc.split),
                task: doc.person_to_protect.as_deref(),
                annotations,
            };
            map.serialize_entry(&doc.doc_id, &record)?;
        }
        map.end()
    }
}

/// Serializes `corpus` to the object-keyed layout.
pub fn corpus_to_string(corpus: &Corpus) -> String {
    serde_json::to_string_pretty(&DocumentsOut(&corpus.documents)).expect("corpus serializes")
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let mut out = corpus_to_string(corpus);
    out.push('\n');
    fs::write(path, out).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })
}

/// Reads a split manifest: a JSON object mapping doc_id to split name.
pub fn load_split_manifest(path: impl AsRef<Path>) -> Result<BTreeMap<String, Split>, CorpusError> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    let value: Value = serde_json::from_str(&raw).map_err(|e| parse_error(&raw, path, 0, &e))?;
    let obj = as_object(&value, "$", path)?;
    obj.iter()
        .map(|(doc_id, v)| {
            let field = format!("$[{}]", json_quote(doc_id));
            let split = v
                .as_str()
                .ok_or_else(|| schema(path, field.clone(), "expected a split name"))?
                .parse::<Split>()
                .map_err(|e| schema(path, field, e.to_string()))?;
            Ok((doc_id.clone(), split))
        })
        .collect()
}

/// Overrides document splits from a manifest. Returns the manifest entries
/// that name no document of the corpus.
pub fn apply_split_manifest(corpus: &mut Corpus, manifest: &BTreeMap<String, Split>) -> Vec<String> {
    let mut used = HashSet::new();
    for doc in &mut corpus.documents {
        if let Some(split) = manifest.get(&doc.doc_id) {
            doc.split = *split;
            used.insert(doc.doc_id.as_str().to_owned());
        }
    }
    manifest.keys().filter(|k| !used.contains(*k)).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(raw: &str) -> Result<Vec<Document>, CorpusError> {
        parse_corpus_str(raw, Path::new("mem.json"))
    }

    const TWO_DOCS: &str = r#"{
      "d1": {"text": "John Doe lives in Oslo.", "dataset_type": "train", "task": "John Doe",
             "annotations": {"a1": {"entity_mentions": [
               {"entity_type": "PERSON", "entity_mention_id": "d1_a1_0", "start_offset": 0, "end_offset": 8,
                "span_text": "John Doe", "identifier_type": "DIRECT", "confidential_status": "NOT_CONFIDENTIAL",
                "entity_id": "d1_a1_e0", "edit_type": "check"},
               {"entity_type": "LOC", "entity_mention_id": "d1_a1_1", "start_offset": 18, "end_offset": 22,
                "span_text": "Oslo", "identifier_type": "QUASI", "confidential_status": "NOT_CONFIDENTIAL",
                "entity_id": "d1_a1_e1"}]}}},
      "d2": {"text": "Nothing here.", "annotations": {}}
    }"#;

    #[test]
    fn parses_object_layout() {
        let docs = parse(TWO_DOCS).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].doc_id, "d1");
        assert_eq!(docs[0].split, Split::Train);
        assert_eq!(docs[0].person_to_protect.as_deref(), Some("John Doe"));
        assert_eq!(docs[0].mention_count(), 2);
        assert_eq!(docs[1].split, Split::Unassigned);
        assert!(validate(&docs[0]).is_empty());
    }

    #[test]
    fn parses_array_layout() {
        let raw = r#"[{"doc_id": "x", "text": "a", "annotations": {}}, {"doc_id": "y", "text": "b", "annotations": {}}]"#;
        let docs = parse(raw).unwrap();
        assert_eq!(docs.iter().map(|d| d.doc_id.as_str()).collect::<Vec<_>>(), ["x", "y"]);
    }

    #[test]
    fn missing_field_names_its_path() {
        let raw = TWO_DOCS.replacen(r#""start_offset": 18, "#, "", 1);
        match parse(&raw) {
            Err(CorpusError::Schema { field_path, .. }) => {
                assert_eq!(field_path, r#"$["d1"].annotations["a1"].entity_mentions[1].start_offset"#)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_category_is_schema_error() {
        let raw = TWO_DOCS.replacen(r#""LOC""#, r#""GPE""#, 1);
        assert!(matches!(parse(&raw), Err(CorpusError::Schema { ref field_path, .. }) if field_path.ends_with("entity_type")));
    }

    #[test]
    fn syntax_error_reports_record_and_byte() {
        let raw = r#"{"a": {"text": "x", "annotations": {}}, "b": {"text": "y" "annotations": {}}}"#;
        match parse(raw) {
            Err(CorpusError::Parse { record, byte, .. }) => {
                assert_eq!(record, 1);
                assert_eq!(&raw[byte..byte + 1], "\"");
                assert!(byte > raw.find("\"b\"").unwrap());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_doc_id_rejected() {
        let raw = r#"{"a": {"text": "x", "annotations": {}}, "a": {"text": "y", "annotations": {}}}"#;
        assert!(matches!(parse(raw), Err(CorpusError::DuplicateDocId { .. })));
    }

    #[test]
    fn round_trip_preserves_order_and_annotators() {
        let docs = parse(TWO_DOCS).unwrap();
        let mut rev = docs.clone();
        rev.reverse();
        let mut second = rev[1].annotations.values().next().unwrap().clone();
        second.annotator = "zeta".into();
        rev[1].annotations.insert("zeta".into(), second);
        let corpus = Corpus::new(rev);
        let back = parse(&corpus_to_string(&corpus)).unwrap();
        assert_eq!(back, corpus.documents);
    }

    #[test]
    fn empty_corpus_round_trips() {
        let out = corpus_to_string(&Corpus::default());
        assert!(parse(&out).unwrap().is_empty());
    }

    #[test]
    fn invalid_documents_reported_not_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, TWO_DOCS.replacen(r#""span_text": "Oslo""#, r#""span_text": "Oslo.""#, 1)).unwrap();
        let (corpus, report) = load_corpus(&path).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(report.invalid.len(), 1);
        assert_eq!(report.invalid[0].0, "d1");
    }

    #[test]
    fn manifest_overrides_split() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("splits.json");
        fs::write(&path, r#"{"d2": "test", "ghost": "dev"}"#).unwrap();
        let manifest = load_split_manifest(&path).unwrap();
        let mut corpus = Corpus::new(parse(TWO_DOCS).unwrap());
        let unknown = apply_split_manifest(&mut corpus, &manifest);
        assert_eq!(unknown, ["ghost"]);
        assert_eq!(corpus.documents[1].split, Split::Test);
    }

    #[test]
    fn directory_load_concatenates() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("b.json"), r#"[{"doc_id": "y", "text": "b", "annotations": {}}]"#).unwrap();
        fs::write(dir.path().join("a.json"), r#"{"x": {"text": "a", "annotations": {}}}"#).unwrap();
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let (corpus, _) = load_corpus(dir.path()).unwrap();
        assert_eq!(corpus.documents.iter().map(|d| d.doc_id.as_str()).collect::<Vec<_>>(), ["x", "y"]);
    }
}
