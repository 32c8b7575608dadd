//! Evaluation toolkit for text anonymization.
//!
//! Loads standoff-annotated corpora, groups mentions into entities, scores
//! system masks with entity-level recall and IC-weighted precision, measures
//! inter-annotator agreement, and ships a rule-based baseline masker.

pub mod agreement;
pub mod corpus;
pub mod ic;
pub mod linking;
pub mod masker;
pub mod masks;
pub mod metrics;
pub mod model;
pub mod report;
pub mod stats;
pub mod synth;
pub mod tokenize;

/// Version written to, and required from, the masks and IC exchange files.
pub const FORMAT_VERSION: u32 = 1;

pub use agreement::{agreement_report, AgreementError, AgreementReport};
pub use corpus::{load_corpus, save_corpus, Corpus, CorpusError, LoadReport};
pub use ic::{ExternalIc, IcError, IcProvider, UnigramIc};
pub use linking::{group_entities, Entity, LinkError};
pub use masker::{apply_mask, Masker, MaskerConfig, MaskerError, MaskStyle};
pub use masks::{load_masks, save_masks, MaskSet, SystemMask};
pub use metrics::{evaluate, MaskPolicy, MetricsError, MetricsReport, Score};
pub use model::{
    AnnotationSet, AnnotatorId, ConfidentialStatus, Document, EntityMention, EntityType, IdentifierType, Split,
};
pub use report::{emit, false_negative_breakdown, ErrorBreakdown, ReportBundle, ReportFormat};
pub use stats::{compute_stats, CorpusStats};
pub use tokenize::{tokenize, tokenizer_fingerprint, TokenIndexSet, TokenSpan, Tokenization};
