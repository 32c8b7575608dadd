//! Random corpora and masks for property tests and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::Corpus;
use crate::masks::{MaskSet, SystemMask};
use crate::model::{AnnotationSet, ConfidentialStatus, Document, EntityMention, EntityType, IdentifierType, Split};
use crate::tokenize::tokenize;

const FILLER: &[&str] = &[
    "the", "court", "applicant", "was", "held", "in", "of", "and", "a", "to", "on", "by", "decision", "appeal",
    "ministry", "hearing", "police", "report", "under", "article", "complained", "that", "had", "been", "not",
];
const NAMES: &[&str] = &["Anna", "Berg", "Olsen", "Kaya", "Petrov", "Jansen", "Müller", "Ødegård", "Novak", "Rossi"];
const PUNCT: &[&str] = &[",", ".", "(", ")", "/", "-", ":"];
const EXTRA: &[&str] = &["2019", "12345", "Göteborg", "Zürich", "no", "Mr", "EUR"];

#[derive(Debug, Clone, Copy)]
pub struct SynthLimits {
    pub max_documents: usize,
    pub max_annotators: usize,
    pub max_mentions: usize,
    pub max_tokens: usize,
}

impl Default for SynthLimits {
    fn default() -> Self {
        Self { max_documents: 5, max_annotators: 3, max_mentions: 20, max_tokens: 200 }
    }
}

fn random_text<R: Rng>(rng: &mut R, n_tokens: usize) -> String {
    let mut text = String::new();
    for i in 0..n_tokens {
        let roll = rng.gen_range(0..10);
        let word = match roll {
            0..=4 => FILLER.choose(rng).unwrap(),
            5..=6 => NAMES.choose(rng).unwrap(),
            7 => EXTRA.choose(rng).unwrap(),
            _ => PUNCT.choose(rng).unwrap(),
        };
        if i > 0 && (roll < 8 || rng.gen_bool(0.3)) {
            text.push(if rng.gen_bool(0.05) { '\n' } else { ' ' });
            if rng.gen_bool(0.03) {
                text.push(' ');
            }
        }
        text.push_str(word);
    }
    text
}

fn random_annotations<R: Rng>(rng: &mut R, doc: &Document, annotator: &str, max_mentions: usize) -> AnnotationSet {
    let tokens = tokenize(&doc.text);
    let chars: Vec<char> = doc.text.chars().collect();
    let mut set = AnnotationSet::new(annotator);
    if tokens.is_empty() {
        return set;
    }
    let n = rng.gen_range(0..=max_mentions);
    let entity_pool = rng.gen_range(1..=n.max(1));
    for i in 0..n {
        let first = rng.gen_range(0..tokens.len());
        let last = (first + rng.gen_range(0..3)).min(tokens.len() - 1);
        let (mut start, mut end) = (tokens[first].start, tokens[last].end);
        if rng.gen_bool(0.1) && end - start > 1 {
            // boundary inside a token
            if rng.gen_bool(0.5) {
                start += 1;
            } else {
                end -= 1;
            }
        }
        set.mentions.push(EntityMention {
            mention_id: format!("{annotator}_m{i}"),
            entity_type: *EntityType::ALL.choose(rng).unwrap(),
            start_offset: start,
            end_offset: end,
            span_text: chars[start..end].iter().collect(),
            identifier_type: *IdentifierType::ALL.choose(rng).unwrap(),
            confidential_status: *ConfidentialStatus::ALL.choose(rng).unwrap(),
            entity_id: format!("{annotator}_e{}", rng.gen_range(0..entity_pool)),
        });
    }
    if set.mentions.len() >= 2 {
        for _ in 0..rng.gen_range(0..3) {
            let a = rng.gen_range(0..set.mentions.len());
            let b = rng.gen_range(0..set.mentions.len());
            set.relations.push((set.mentions[a].mention_id.clone(), set.mentions[b].mention_id.clone()));
        }
    }
    set
}

/// A random valid corpus within `limits`. Documents may have no annotators.
pub fn random_corpus<R: Rng>(rng: &mut R, limits: SynthLimits) -> Corpus {
    let n_docs = rng.gen_range(1..=limits.max_documents);
    let docs = (0..n_docs)
        .map(|i| {
            let n_tokens = rng.gen_range(0..=limits.max_tokens);
            let mut doc = Document::new(format!("doc{i}"), random_text(rng, n_tokens));
            doc.split = *[Split::Train, Split::Dev, Split::Test].choose(rng).unwrap();
            let n_ann = rng.gen_range(0..=limits.max_annotators);
            for a in 0..n_ann {
                let name = format!("annotator{a}");
                let set = random_annotations(rng, &doc, &name, limits.max_mentions);
                doc.annotations.insert(name.as_str().into(), set);
            }
            doc
        })
        .collect();
    Corpus::new(docs)
}

/// A random mask for every document: either a token subset or character
/// spans, with a bias towards covering annotated mentions.
pub fn random_masks<R: Rng>(rng: &mut R, corpus: &Corpus) -> MaskSet {
    let mut out = MaskSet::new();
    for doc in &corpus.documents {
        let tokens = doc.tokenization();
        let mask = if rng.gen_bool(0.5) {
            let p = rng.gen_range(0.0..1.0);
            SystemMask::from_tokens(doc.doc_id.clone(), (0..tokens.len()).filter(|_| rng.gen_bool(p)))
        } else {
            let mut spans: Vec<(usize, usize)> = doc
                .annotations
                .values()
                .flat_map(|s| &s.mentions)
                .filter(|_| rng.gen_bool(0.6))
                .map(|m| (m.start_offset, m.end_offset))
                .collect();
            let len = tokens.char_len();
            for _ in 0..rng.gen_range(0..4) {
                if len > 0 {
                    let s = rng.gen_range(0..len);
                    spans.push((s, (s + rng.gen_range(1..10)).min(len)));
                }
            }
            SystemMask::from_spans(doc.doc_id.clone(), &tokens, spans).expect("spans within text")
        };
        out.insert(doc.doc_id.clone(), mask);
    }
    out
}

/// A document whose direct identifiers (person names and case numbers) are
/// annotated at every occurrence by every annotator, each annotator using a
/// single identifier type per entity.
pub fn consistently_annotated_document<R: Rng>(rng: &mut R, doc_id: &str) -> Document {
    const GIVEN: &[&str] = &["Anna", "Jonas", "Leyla", "Ivan", "Marta", "Ólafur"];
    const FAMILY: &[&str] = &["Berg", "Kaya", "Petrov", "Jansen", "Novak", "Ødegård"];
    let n_entities = rng.gen_range(1..=4);
    let mut names: Vec<String> = Vec::new();
    while names.len() < n_entities {
        let name = if rng.gen_bool(0.8) {
            format!("{} {}", GIVEN.choose(rng).unwrap(), FAMILY.choose(rng).unwrap())
        } else {
            format!("{}/{}", rng.gen_range(1000..99999), rng.gen_range(10..99))
        };
        // no name may contain another, or an unannotated occurrence could hide inside
        if names.iter().all(|n| !n.contains(&name) && !name.contains(n.as_str())) {
            names.push(name);
        }
    }
    let mut text = String::new();
    let mut occurrences: Vec<(usize, usize, usize)> = Vec::new();
    let mut len = 0;
    for _ in 0..rng.gen_range(5..60) {
        if !text.is_empty() {
            text.push(' ');
            len += 1;
        }
        if rng.gen_bool(0.2) {
            let e = rng.gen_range(0..names.len());
            occurrences.push((e, len, len + names[e].chars().count()));
            text.push_str(&names[e]);
            len += names[e].chars().count();
        } else {
            let w = if rng.gen_bool(0.15) { *PUNCT.choose(rng).unwrap() } else { *FILLER.choose(rng).unwrap() };
            text.push_str(w);
            len += w.chars().count();
        }
    }
    let mut doc = Document::new(doc_id, text);
    let chars: Vec<char> = doc.text.chars().collect();
    for a in 0..rng.gen_range(1..=3) {
        let name = format!("annotator{a}");
        let mut set = AnnotationSet::new(name.as_str());
        let policy: Vec<IdentifierType> = (0..names.len())
            .map(|_| if rng.gen_bool(0.8) { IdentifierType::Direct } else { IdentifierType::Quasi })
            .collect();
        for (i, &(e, s, t)) in occurrences.iter().enumerate() {
            set.mentions.push(EntityMention {
                mention_id: format!("{name}_m{i}"),
                entity_type: if names[e].contains('/') { EntityType::Code } else { EntityType::Person },
                start_offset: s,
                end_offset: t,
                span_text: chars[s..t].iter().collect(),
                identifier_type: policy[e],
                confidential_status: ConfidentialStatus::NotConfidential,
                entity_id: format!("{name}_e{e}"),
            });
        }
        doc.annotations.insert(name.as_str().into(), set);
    }
    doc
}
