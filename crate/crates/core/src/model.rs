//! Documents, annotators and entity mentions.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::tokenize::{AlignError, CharIndex, TokenIndexSet, Tokenization};

macro_rules! label_enum {
    (
        $(#[$meta:meta])*
        $name:ident { $($variant:ident => $text:literal),+ $(,)? }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            /// Every variant, in inventory order.
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = UnknownLabel;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(UnknownLabel { kind: stringify!($name), value: s.to_string() }),
                }
            }
        }
    };
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} label {value:?}")]
pub struct UnknownLabel {
    pub kind: &'static str,
    pub value: String,
}

label_enum! {
    /// Semantic category of a mention.
    EntityType {
        Person => "PERSON",
        Code => "CODE",
        Loc => "LOC",
        Org => "ORG",
        Dem => "DEM",
        Datetime => "DATETIME",
        Quantity => "QUANTITY",
        Misc => "MISC",
    }
}

label_enum! {
    /// Masking decision attached to a mention.
    IdentifierType {
        Direct => "DIRECT",
        Quasi => "QUASI",
        NoMask => "NO_MASK",
    }
}

label_enum! {
    ConfidentialStatus {
        NotConfidential => "NOT_CONFIDENTIAL",
        Belief => "BELIEF",
        Politics => "POLITICS",
        Sex => "SEX",
        Ethnic => "ETHNIC",
        Health => "HEALTH",
    }
}

label_enum! {
    Split {
        Train => "train",
        Dev => "dev",
        Test => "test",
        Unassigned => "unassigned",
    }
}

#[allow(clippy::derivable_impls)]
impl Default for Split {
    fn default() -> Self {
        Split::Unassigned
    }
}

impl IdentifierType {
    /// DIRECT > QUASI > NO_MASK.
    pub fn severity(self) -> u8 {
        match self {
            IdentifierType::Direct => 2,
            IdentifierType::Quasi => 1,
            IdentifierType::NoMask => 0,
        }
    }

    pub fn needs_masking(self) -> bool {
        self != IdentifierType::NoMask
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnnotatorId(String);

impl AnnotatorId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AnnotatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AnnotatorId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub mention_id: String,
    pub entity_type: EntityType,
    pub start_offset: usize,
    pub end_offset: usize,
    pub span_text: String,
    pub identifier_type: IdentifierType,
    pub confidential_status: ConfidentialStatus,
    pub entity_id: String,
}

/// One annotator's mentions and coreference links on one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub annotator: AnnotatorId,
    pub mentions: Vec<EntityMention>,
    /// Explicit coreference links between mention ids. Links implied by a
    /// shared `entity_id` are not repeated here.
    #[serde(default)]
    pub relations: Vec<(String, String)>,
}

impl AnnotationSet {
    pub fn new(annotator: impl Into<AnnotatorId>) -> Self {
        Self { annotator: annotator.into(), mentions: Vec::new(), relations: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub split: Split,
    /// Description of the person whose identity is to be protected.
    pub person_to_protect: Option<String>,
    pub annotations: BTreeMap<AnnotatorId, AnnotationSet>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            text: text.into(),
            split: Split::Unassigned,
            person_to_protect: None,
            annotations: BTreeMap::new(),
        }
    }

    pub fn tokenization(&self) -> Tokenization {
        Tokenization::new(&self.text)
    }

    pub fn annotators(&self) -> impl Iterator<Item = &AnnotatorId> {
        self.annotations.keys()
    }

    pub fn is_evaluable(&self) -> bool {
        !self.annotations.is_empty()
    }

    pub fn mention_count(&self) -> usize {
        self.annotations.values().map(|a| a.mentions.len()).sum()
    }
}

/// Token indices covered by `mention` under any-overlap alignment.
pub fn mention_tokens(
    tokens: &Tokenization,
    mention: &EntityMention,
) -> Result<TokenIndexSet, AlignError> {
    tokens.project(mention.start_offset, mention.end_offset)
}

/// A broken invariant found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind")]
pub enum Violation {
    EmptyAnnotatorId,
    AnnotatorKeyMismatch { key: AnnotatorId, annotator: AnnotatorId },
    OffsetOutOfRange { annotator: AnnotatorId, mention_id: String, start: usize, end: usize, text_len: usize },
    EmptySpan { annotator: AnnotatorId, mention_id: String, start: usize, end: usize },
    SpanTextMismatch { annotator: AnnotatorId, mention_id: String, expected: String, found: String },
    DuplicateMentionId { annotator: AnnotatorId, mention_id: String },
    DanglingRelation { annotator: AnnotatorId, from: String, to: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyAnnotatorId => write!(f, "empty annotator id"),
            Violation::AnnotatorKeyMismatch { key, annotator } => {
                write!(f, "annotation set under key {key} names annotator {annotator}")
            }
            Violation::OffsetOutOfRange { annotator, mention_id, start, end, text_len } => write!(
                f,
                "{annotator}/{mention_id}: offsets [{start}, {end}) outside text of length {text_len}"
            ),
            Violation::EmptySpan { annotator, mention_id, start, end } => {
                write!(f, "{annotator}/{mention_id}: span [{start}, {end}) is empty or covers only whitespace")
            }
            Violation::SpanTextMismatch { annotator, mention_id, expected, found } => write!(
                f,
                "{annotator}/{mention_id}: span_text {found:?} differs from text slice {expected:?}"
            ),
            Violation::DuplicateMentionId { annotator, mention_id } => {
                write!(f, "{annotator}: duplicate mention id {mention_id}")
            }
            Violation::DanglingRelation { annotator, from, to } => {
                write!(f, "{annotator}: relation {from} -> {to} references a missing mention")
            }
        }
    }
}

/// Checks every structural invariant of `doc`. An empty result means the
/// document is well-formed.
pub fn validate(doc: &Document) -> Vec<Violation> {
    let mut out = Vec::new();
    let chars = CharIndex::new(&doc.text);
    let text_len = chars.char_len();
    for (key, set) in &doc.annotations {
        if key.as_str().is_empty() {
            out.push(Violation::EmptyAnnotatorId);
        }
        if *key != set.annotator {
            out.push(Violation::AnnotatorKeyMismatch { key: key.clone(), annotator: set.annotator.clone() });
        }
        let mut seen = HashSet::new();
        for m in &set.mentions {
            if !seen.insert(m.mention_id.as_str()) {
                out.push(Violation::DuplicateMentionId {
                    annotator: key.clone(),
                    mention_id: m.mention_id.clone(),
                });
            }
            if m.end_offset > text_len || m.start_offset > m.end_offset {
                out.push(Violation::OffsetOutOfRange {
                    annotator: key.clone(),
                    mention_id: m.mention_id.clone(),
                    start: m.start_offset,
                    end: m.end_offset,
                    text_len,
                });
                continue;
            }
            let slice = chars.slice(&doc.text, m.start_offset, m.end_offset);
            if slice.trim().is_empty() {
                out.push(Violation::EmptySpan {
                    annotator: key.clone(),
                    mention_id: m.mention_id.clone(),
                    start: m.start_offset,
                    end: m.end_offset,
                });
            }
            if slice != m.span_text {
                out.push(Violation::SpanTextMismatch {
                    annotator: key.clone(),
                    mention_id: m.mention_id.clone(),
                    expected: slice.to_string(),
                    found: m.span_text.clone(),
                });
            }
        }
        for (from, to) in &set.relations {
            if !seen.contains(from.as_str()) || !seen.contains(to.as_str()) {
                out.push(Violation::DanglingRelation {
                    annotator: key.clone(),
                    from: from.clone(),
                    to: to.clone(),
                });
            }
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn mention(id: &str, text: &str, needle: &str, ident: IdentifierType, entity: &str) -> EntityMention {
        let byte = text.find(needle).expect("needle present");
        let start = text[..byte].chars().count();
        EntityMention {
            mention_id: id.to_string(),
            entity_type: EntityType::Person,
            start_offset: start,
            end_offset: start + needle.chars().count(),
            span_text: needle.to_string(),
            identifier_type: ident,
            confidential_status: ConfidentialStatus::NotConfidential,
            entity_id: entity.to_string(),
        }
    }

    pub(crate) fn fixture() -> Document {
        let text = "Mr John Doe visited Göteborg. Doe stayed.";
        let mut doc = Document::new("d1", text);
        let mut set = AnnotationSet::new("ann1");
        set.mentions.push(mention("m1", text, "John Doe", IdentifierType::Direct, "e1"));
        set.mentions.push(mention("m2", text, "Göteborg", IdentifierType::Quasi, "e2"));
        set.mentions.push(mention("m3", text, "Doe stayed", IdentifierType::Direct, "e3"));
        set.relations.push(("m1".into(), "m3".into()));
        doc.annotations.insert("ann1".into(), set);
        doc
    }

    #[test]
    fn well_formed_fixture_is_clean() {
        assert_eq!(validate(&fixture()), vec![]);
    }

    #[test]
    fn span_text_mismatch() {
        let mut doc = fixture();
        doc.annotations.get_mut(&AnnotatorId::from("ann1")).unwrap().mentions[0].span_text = "Jon Doe".into();
        let v = validate(&doc);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::SpanTextMismatch { .. }));
    }

    #[test]
    fn dangling_relation() {
        let mut doc = fixture();
        doc.annotations.get_mut(&AnnotatorId::from("ann1")).unwrap().relations.push(("m1".into(), "m9".into()));
        let v = validate(&doc);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::DanglingRelation { .. }));
    }

    #[test]
    fn label_round_trip() {
        for t in EntityType::ALL {
            assert_eq!(t.as_str().parse::<EntityType>().unwrap(), *t);
        }
        assert!("PER".parse::<EntityType>().is_err());
        assert!("direct".parse::<IdentifierType>().is_err());
    }

    #[derive(Debug, Clone)]
    enum Mutation {
        Offset(usize),
        Start(usize),
        SpanText(usize),
        DupId(usize),
        Relation(usize),
        AnnotatorKey,
    }

    fn apply(doc: &mut Document, m: &Mutation) {
        let set = doc.annotations.get_mut(&AnnotatorId::from("ann1")).unwrap();
        let n = set.mentions.len();
        match *m {
            Mutation::Offset(i) => set.mentions[i % n].end_offset = 1000,
            Mutation::Start(i) => {
                let mm = &mut set.mentions[i % n];
                mm.start_offset = mm.end_offset + 1;
            }
            Mutation::SpanText(i) => set.mentions[i % n].span_text.push('x'),
            Mutation::DupId(i) => {
                let id = set.mentions[i % n].mention_id.clone();
                set.mentions[(i + 1) % n].mention_id = id;
            }
            Mutation::Relation(i) => set.relations.push((set.mentions[i % n].mention_id.clone(), "ghost".into())),
            Mutation::AnnotatorKey => set.annotator = AnnotatorId::from("someone-else"),
        }
    }

    proptest! {
        #[test]
        fn any_single_mutation_is_reported(m in prop_oneof![
            (0usize..3).prop_map(Mutation::Offset),
            (0usize..3).prop_map(Mutation::Start),
            (0usize..3).prop_map(Mutation::SpanText),
            (0usize..3).prop_map(Mutation::DupId),
            (0usize..3).prop_map(Mutation::Relation),
            Just(Mutation::AnnotatorKey),
        ]) {
            let mut doc = fixture();
            apply(&mut doc, &m);
            prop_assert!(!validate(&doc).is_empty(), "{:?} not detected", m);
        }
    }
}
