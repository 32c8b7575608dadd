//! Shared helpers for integration tests: fixture loading and a brute-force
//! metrics oracle that shares no code with the library beyond the data types.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;

use anonymeval_core::masks::MaskSet;
use anonymeval_core::model::{AnnotationSet, Document, IdentifierType};
use anonymeval_core::Corpus;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Token boundaries as (start, end) code-point offsets.
pub fn oracle_tokens(text: &str) -> Vec<(usize, usize)> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
        } else if chars[i].is_alphanumeric() {
            let s = i;
            while i < chars.len() && chars[i].is_alphanumeric() {
                i += 1;
            }
            out.push((s, i));
        } else {
            out.push((i, i + 1));
            i += 1;
        }
    }
    out
}

fn overlapping(tokens: &[(usize, usize)], start: usize, end: usize) -> BTreeSet<usize> {
    (0..tokens.len()).filter(|&i| tokens[i].0 < end && start < tokens[i].1).collect()
}

/// Groups of mention indices, by breadth-first search over an explicit
/// adjacency matrix.
#[allow(clippy::needless_range_loop)]
pub fn oracle_groups(set: &AnnotationSet) -> Vec<Vec<usize>> {
    let n = set.mentions.len();
    let collapse = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");
    let mut adj = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (&set.mentions[i], &set.mentions[j]);
            if collapse(&a.span_text) == collapse(&b.span_text) || a.entity_id == b.entity_id {
                adj[i][j] = true;
            }
        }
    }
    for (x, y) in &set.relations {
        let xi = set.mentions.iter().position(|m| &m.mention_id == x);
        let yi = set.mentions.iter().position(|m| &m.mention_id == y);
        if let (Some(i), Some(j)) = (xi, yi) {
            adj[i][j] = true;
            adj[j][i] = true;
        }
    }
    let mut seen = vec![false; n];
    let mut groups = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        let mut group = vec![s];
        seen[s] = true;
        let mut k = 0;
        while k < group.len() {
            let u = group[k];
            for v in 0..n {
                if adj[u][v] && !seen[v] {
                    seen[v] = true;
                    group.push(v);
                }
            }
            k += 1;
        }
        group.sort();
        groups.push(group);
    }
    groups
}

pub struct OracleEntity {
    pub class: IdentifierType,
    pub tokens: BTreeSet<usize>,
}

pub fn oracle_entities(doc: &Document, set: &AnnotationSet) -> Vec<OracleEntity> {
    let tokens = oracle_tokens(&doc.text);
    oracle_groups(set)
        .into_iter()
        .map(|g| {
            let ms: Vec<_> = g.iter().map(|&i| &set.mentions[i]).collect();
            let class = if ms.iter().any(|m| m.identifier_type == IdentifierType::Direct) {
                IdentifierType::Direct
            } else if ms.iter().any(|m| m.identifier_type == IdentifierType::Quasi) {
                IdentifierType::Quasi
            } else {
                IdentifierType::NoMask
            };
            let mut toks = BTreeSet::new();
            for m in ms {
                toks.extend(overlapping(&tokens, m.start_offset, m.end_offset));
            }
            OracleEntity { class, tokens: toks }
        })
        .collect()
}

/// The mask's token set, re-projected from its character spans when known.
pub fn oracle_mask(doc: &Document, masks: &MaskSet) -> BTreeSet<usize> {
    let Some(m) = masks.get(&doc.doc_id) else { return BTreeSet::new() };
    match &m.masked_spans {
        Some(spans) => {
            let tokens = oracle_tokens(&doc.text);
            spans.iter().flat_map(|&(s, e)| overlapping(&tokens, s, e)).collect()
        }
        None => m.masked_tokens.iter().collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OracleCounts {
    pub er_di: (u64, u64),
    pub er_qi: (u64, u64),
    pub r: (u64, u64),
    pub p: (u64, u64),
    pub wp: (f64, f64),
}

/// Per-token weight for the WP oracle: uniform, or add-one unigram IC
/// recomputed from scratch over the whole corpus.
pub enum OracleIc {
    Uniform,
    Unigram { counts: HashMap<String, u64>, total: u64 },
}

impl OracleIc {
    pub fn unigram(corpus: &Corpus) -> Self {
        let mut counts = HashMap::new();
        let mut total = 0;
        for d in &corpus.documents {
            let chars: Vec<char> = d.text.chars().collect();
            for (s, e) in oracle_tokens(&d.text) {
                let w: String = chars[s..e].iter().collect::<String>().to_lowercase();
                *counts.entry(w).or_insert(0) += 1;
                total += 1;
            }
        }
        OracleIc::Unigram { counts, total }
    }

    fn weight(&self, word: &str) -> f64 {
        match self {
            OracleIc::Uniform => 1.0,
            OracleIc::Unigram { counts, total } => {
                let c = counts.get(&word.to_lowercase()).copied().unwrap_or(0);
                let p = (c as f64 + 1.0) / (*total as f64 + counts.len() as f64);
                (-p.ln()).max(0.0)
            }
        }
    }
}

pub fn oracle_counts(corpus: &Corpus, masks: &MaskSet, ic: &OracleIc) -> OracleCounts {
    let mut c = OracleCounts::default();
    for doc in &corpus.documents {
        if doc.annotations.is_empty() {
            continue;
        }
        let tokens = oracle_tokens(&doc.text);
        let chars: Vec<char> = doc.text.chars().collect();
        let mask = oracle_mask(doc, masks);
        let weight = |t: usize| ic.weight(&chars[tokens[t].0..tokens[t].1].iter().collect::<String>());
        let mask_weight: f64 = mask.iter().map(|&t| weight(t)).sum();
        for set in doc.annotations.values() {
            let entities = oracle_entities(doc, set);
            let mut to_mask = BTreeSet::new();
            for e in &entities {
                let protected = e.tokens.iter().all(|t| mask.contains(t));
                match e.class {
                    IdentifierType::Direct => {
                        c.er_di.1 += 1;
                        c.er_di.0 += protected as u64;
                    }
                    IdentifierType::Quasi => {
                        c.er_qi.1 += 1;
                        c.er_qi.0 += protected as u64;
                    }
                    IdentifierType::NoMask => continue,
                }
                to_mask.extend(e.tokens.iter().copied());
            }
            let hit: Vec<usize> = to_mask.iter().copied().filter(|t| mask.contains(t)).collect();
            c.r.0 += hit.len() as u64;
            c.r.1 += to_mask.len() as u64;
            c.p.0 += hit.len() as u64;
            c.p.1 += mask.len() as u64;
            c.wp.0 += hit.iter().map(|&t| weight(t)).sum::<f64>();
            c.wp.1 += mask_weight;
        }
    }
    c
}
