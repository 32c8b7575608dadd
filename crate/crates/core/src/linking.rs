//! Grouping one annotator's mentions into entities.
//!
//! Two mentions belong to the same entity when they are connected through any
//! chain of identical (whitespace-collapsed, case-sensitive) surface strings,
//! shared `entity_id` values or explicit coreference relations.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::model::{AnnotationSet, AnnotatorId, Document, EntityMention, EntityType, IdentifierType};
use crate::tokenize::{AlignError, TokenIndexSet, Tokenization};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinkError {
    #[error("document {doc_id} has no annotations by {annotator}")]
    UnknownAnnotator { doc_id: String, annotator: AnnotatorId },
    #[error("document {doc_id}, mention {mention_id}: {source}")]
    Align {
        doc_id: String,
        mention_id: String,
        #[source]
        source: AlignError,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Entity {
    pub entity_key: String,
    pub mentions: Vec<EntityMention>,
    pub token_set: TokenIndexSet,
    pub identifier_class: IdentifierType,
    pub entity_type: EntityType,
}

/// Collapses internal whitespace runs and trims.
pub fn normalize_surface(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Partitions the mentions of `set` into linked groups of mention indices.
/// Relation endpoints that name no mention are ignored.
pub fn link_mentions(set: &AnnotationSet) -> Vec<Vec<usize>> {
    let n = set.mentions.len();
    let mut ds = DisjointSet::new(n);
    let mut by_surface: HashMap<String, usize> = HashMap::new();
    let mut by_entity: HashMap<&str, usize> = HashMap::new();
    let mut by_id: HashMap<&str, usize> = HashMap::new();
    for (i, m) in set.mentions.iter().enumerate() {
        if let Some(&j) = by_surface.get(&normalize_surface(&m.span_text)) {
            ds.union(i, j);
        } else {
            by_surface.insert(normalize_surface(&m.span_text), i);
        }
        match by_entity.get(m.entity_id.as_str()) {
            Some(&j) => ds.union(i, j),
            None => {
                by_entity.insert(&m.entity_id, i);
            }
        }
        by_id.entry(&m.mention_id).or_insert(i);
    }
    for (a, b) in &set.relations {
        if let (Some(&i), Some(&j)) = (by_id.get(a.as_str()), by_id.get(b.as_str())) {
            ds.union(i, j);
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..n {
        groups.entry(ds.find(i)).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
    groups.sort_by_key(|g| g[0]);
    groups
}

fn dominant_type(mentions: &[EntityMention]) -> EntityType {
    let mut counts = [0usize; 8];
    for m in mentions {
        counts[EntityType::ALL.iter().position(|t| *t == m.entity_type).unwrap_or(7)] += 1;
    }
    let best = counts.iter().copied().max().unwrap_or(0);
    // ties go to the earliest type in inventory order
    EntityType::ALL[counts.iter().position(|&c| c == best).unwrap_or(0)]
}

/// Groups `annotator`'s mentions on `doc` into entities.
///
/// Output order and content do not depend on the order of the mention list.
pub fn group_entities(
    doc: &Document,
    tokens: &Tokenization,
    annotator: &AnnotatorId,
) -> Result<Vec<Entity>, LinkError> {
    let set = doc.annotations.get(annotator).ok_or_else(|| LinkError::UnknownAnnotator {
        doc_id: doc.doc_id.clone(),
        annotator: annotator.clone(),
    })?;
    let mut entities = Vec::new();
    for group in link_mentions(set) {
        let mut mentions: Vec<EntityMention> = group.iter().map(|&i| set.mentions[i].clone()).collect();
        mentions.sort_by(|a, b| {
            (a.start_offset, a.end_offset, &a.mention_id).cmp(&(b.start_offset, b.end_offset, &b.mention_id))
        });
        let mut token_set = TokenIndexSet::new();
        for m in &mentions {
            let toks = tokens.project(m.start_offset, m.end_offset).map_err(|source| LinkError::Align {
                doc_id: doc.doc_id.clone(),
                mention_id: m.mention_id.clone(),
                source,
            })?;
            token_set.extend_from(&toks);
        }
        let identifier_class = mentions
            .iter()
            .map(|m| m.identifier_type)
            .max_by_key(|t| t.severity())
            .unwrap_or(IdentifierType::NoMask);
        let entity_key = mentions.iter().map(|m| m.entity_id.as_str()).min().unwrap_or_default().to_string();
        entities.push(Entity { entity_key, entity_type: dominant_type(&mentions), mentions, token_set, identifier_class });
    }
    entities.sort_by(|a, b| {
        let ka = (a.mentions[0].start_offset, a.mentions[0].end_offset, &a.mentions[0].mention_id);
        let kb = (b.mentions[0].start_offset, b.mentions[0].end_offset, &b.mentions[0].mention_id);
        ka.cmp(&kb)
    });
    Ok(entities)
}

/// Entities split by identifier class.
#[derive(Debug, Clone, Default)]
pub struct IdentifierPartition {
    pub direct: Vec<Entity>,
    pub quasi: Vec<Entity>,
    pub unmasked: Vec<Entity>,
}

pub fn identifier_partition(entities: Vec<Entity>) -> IdentifierPartition {
    let mut p = IdentifierPartition::default();
    for e in entities {
        match e.identifier_class {
            IdentifierType::Direct => p.direct.push(e),
            IdentifierType::Quasi => p.quasi.push(e),
            IdentifierType::NoMask => p.unmasked.push(e),
        }
    }
    p
}
