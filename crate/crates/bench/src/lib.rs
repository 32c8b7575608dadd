//! Seeded workloads shared by the benchmarks.

use anonymeval_core::synth::{random_corpus, random_masks, SynthLimits};
use anonymeval_core::{Corpus, MaskSet};
use rand::rngs::StdRng;
use rand::SeedableRng;

/// A synthetic corpus of roughly `documents` documents with matching system masks.
pub fn workload(seed: u64, documents: usize) -> (Corpus, MaskSet) {
    let mut rng = StdRng::seed_from_u64(seed);
    let limits = SynthLimits { max_documents: 5, max_annotators: 3, max_mentions: 40, max_tokens: 400 };
    let mut corpus = Corpus::default();
    while corpus.len() < documents {
        let batch = random_corpus(&mut rng, limits);
        for mut doc in batch.documents {
            doc.doc_id = format!("bench-{}", corpus.len());
            corpus.documents.push(doc);
        }
    }
    let masks = random_masks(&mut rng, &corpus);
    (corpus, masks)
}
