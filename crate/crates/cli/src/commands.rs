use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anonymeval_core::agreement::{agreement_report, AgreementError};
use anonymeval_core::corpus::{apply_split_manifest, load_split_manifest};
use anonymeval_core::masker::{annotator_mask_spans, mask_corpus, system_mask_spans, MaskSpan, Masker};
use anonymeval_core::report::{
    agreement_to_csv, agreement_to_structured, emit, emit_confusion_csv, stats_to_csv, stats_to_structured,
};
use anonymeval_core::stats::CorpusStats;
use anonymeval_core::{
    apply_mask, compute_stats, evaluate, false_negative_breakdown, load_corpus, load_masks, save_masks, Corpus,
    ExternalIc, IcProvider, MaskSet, MaskStyle, ReportBundle, ReportFormat, Split, SystemMask, UnigramIc,
};
use anyhow::{Context, Result};
use rayon::prelude::*;

use crate::config::{IcSelection, MaskSource, RunConfig};

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Clean,
    Findings,
}

fn load(path: &Path, manifest: Option<&Path>) -> Result<Corpus> {
    let (mut corpus, report) = load_corpus(path)?;
    if !report.is_clean() {
        eprintln!(
            "warning: {} document(s) with {} validation finding(s); run `anonymeval validate` for details",
            report.invalid.len(),
            report.violation_count()
        );
    }
    if let Some(m) = manifest {
        let unknown = apply_split_manifest(&mut corpus, &load_split_manifest(m)?);
        if !unknown.is_empty() {
            eprintln!("warning: split manifest names {} unknown document(s)", unknown.len());
        }
    }
    Ok(corpus)
}

fn restrict(corpus: &mut Corpus, splits: &[Split]) {
    if !splits.is_empty() {
        corpus.retain_splits(splits);
    }
}

fn write(path: &Path, body: String) -> Result<()> {
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

pub fn validate(corpus: &Path) -> Result<Status> {
    let (corpus, report) = load_corpus(corpus)?;
    for (doc_id, violations) in &report.invalid {
        for v in violations {
            println!("{doc_id}: {v}");
        }
    }
    println!("{} document(s), {} violation(s)", corpus.len(), report.violation_count());
    Ok(if report.is_clean() { Status::Clean } else { Status::Findings })
}

fn percent(part: usize, whole: usize) -> String {
    if whole == 0 {
        "-".into()
    } else {
        format!("{:.1}%", 100.0 * part as f64 / whole as f64)
    }
}

fn print_stats(s: &CorpusStats) {
    println!("documents             {}", s.n_documents);
    println!("document annotations  {}", s.n_document_annotations);
    println!("entities              {}", s.n_entities);
    println!("mentions              {}", s.n_mentions);
    println!("tokens                {}", s.n_tokens);
    println!("direct identifiers    {} ({})", s.n_direct, percent(s.n_direct, s.n_mentions));
    println!("quasi identifiers     {} ({})", s.n_quasi, percent(s.n_quasi, s.n_mentions));
    println!("no mask               {} ({})", s.n_no_mask, percent(s.n_no_mask, s.n_mentions));
    println!();
    println!("{:<10} {:>9} {:>7} {:>8} {:>7} {:>13}", "type", "mentions", "share", "direct", "quasi", "confidential");
    for (t, c) in &s.per_entity_type {
        println!(
            "{:<10} {:>9} {:>7} {:>8} {:>7} {:>13}",
            t.as_str(),
            c.mentions,
            percent(c.mentions, s.n_mentions),
            c.direct,
            c.quasi,
            c.confidential
        );
    }
    println!();
    for (split, c) in &s.per_split {
        println!("split {:<10} {} document(s), {} annotation(s)", split.as_str(), c.documents, c.annotations);
    }
}

pub fn stats(
    corpus: &Path,
    manifest: Option<&Path>,
    splits: &[Split],
    output: Option<&Path>,
    csv: bool,
) -> Result<Status> {
    let mut corpus = load(corpus, manifest)?;
    restrict(&mut corpus, splits);
    let s = compute_stats(&corpus);
    print_stats(&s);
    if let Some(path) = output {
        write(path, if csv { stats_to_csv(&s)? } else { stats_to_structured(&s) })?;
    }
    Ok(Status::Clean)
}

fn build_masks(source: &MaskSource, full: &Corpus, corpus: &Corpus) -> Result<MaskSet> {
    match source {
        MaskSource::File(path) => {
            let loaded = load_masks(path, full)?;
            if !loaded.unknown_documents.is_empty() {
                eprintln!(
                    "warning: masks file has entries for {} document(s) not in the corpus",
                    loaded.unknown_documents.len()
                );
            }
            Ok(loaded.masks)
        }
        MaskSource::Masker(config) => Ok(mask_corpus(corpus, &Masker::new(config)?)),
    }
}

pub fn evaluate_cmd(run: &RunConfig) -> Result<Status> {
    let full = load(&run.corpus, run.split_manifest.as_deref())?;
    let ic = match &run.ic {
        IcSelection::Uniform => IcProvider::Uniform,
        IcSelection::Unigram => IcProvider::Unigram(UnigramIc::from_corpus(&full)),
        IcSelection::External(p) => IcProvider::External(ExternalIc::load(p)?),
    };
    let mut corpus = full.clone();
    restrict(&mut corpus, &run.splits);
    let masks = build_masks(&run.mask_source, &full, &corpus)?;

    let metrics = evaluate(&corpus, &masks, run.policy, &ic)?;
    let errors = false_negative_breakdown(&corpus, &masks, run.policy)?;

    let evaluated = corpus.documents.iter().filter(|d| d.is_evaluable()).count();
    let c = metrics.counts;
    println!("documents evaluated  {evaluated}");
    println!("ER_di  {}  ({}/{})", metrics.er_di, c.er_di.numerator, c.er_di.denominator);
    println!("ER_qi  {}  ({}/{})", metrics.er_qi, c.er_qi.numerator, c.er_qi.denominator);
    println!("R      {}  ({}/{})", metrics.r_token, c.r_token.numerator, c.r_token.denominator);
    println!("P      {}  ({}/{})", metrics.p_token, c.p_token.numerator, c.p_token.denominator);
    println!("WP     {}  (ic: {})", metrics.wp, ic.kind());
    let missed: Vec<String> = errors
        .per_entity_type
        .iter()
        .filter(|(_, f)| f.false_negative_entities > 0)
        .map(|(t, f)| format!("{t} {}/{}", f.false_negative_entities, f.total_entities))
        .collect();
    if !missed.is_empty() {
        println!("false negatives      {}", missed.join(", "));
    }

    if let Some(path) = &run.output {
        let mut inputs = BTreeMap::new();
        inputs.insert("corpus".to_string(), run.corpus.display().to_string());
        inputs.insert(
            "masks".to_string(),
            match &run.mask_source {
                MaskSource::File(p) => p.display().to_string(),
                MaskSource::Masker(_) => "baseline masker".to_string(),
            },
        );
        inputs.insert("ic".to_string(), ic.kind().to_string());
        inputs.insert("policy".to_string(), format!("{:?}", run.policy).to_lowercase());
        if !run.splits.is_empty() {
            let names: Vec<&str> = run.splits.iter().map(|s| s.as_str()).collect();
            inputs.insert("splits".to_string(), names.join(","));
        }
        let bundle = ReportBundle { inputs, metrics, errors, ..Default::default() };
        emit(&bundle, if run.csv { ReportFormat::Csv } else { ReportFormat::Structured }, path)?;
    }
    Ok(Status::Clean)
}

pub struct AgreementArgs<'a> {
    pub corpus: &'a Path,
    pub manifest: Option<&'a Path>,
    pub splits: &'a [Split],
    pub output: Option<&'a Path>,
    pub csv: bool,
    pub confusion_csv: Option<&'a Path>,
}

pub fn agreement(args: AgreementArgs<'_>) -> Result<Status> {
    let mut corpus = load(args.corpus, args.manifest)?;
    restrict(&mut corpus, args.splits);
    let report = match agreement_report(&corpus) {
        Ok(r) => r,
        Err(e @ AgreementError::FewerThanTwoAnnotators { .. }) => {
            eprintln!("{e}: no document in the selection has two or more annotators");
            return Ok(Status::Findings);
        }
        Err(e) => return Err(e.into()),
    };
    println!("documents compared  {}", report.documents_compared);
    for row in &report.rows {
        println!("{row}");
    }
    println!("relations           mention pairs={} kappa={}", report.relations.mention_pairs, report.relations.cohen_kappa);
    println!("entity-type mismatches on identical spans  {}", report.disagreements.entity_type_confusion.total());
    if report.partial_collisions > 0 {
        println!("partial-mode start-offset collisions       {}", report.partial_collisions);
    }
    if let Some(path) = args.output {
        write(path, if args.csv { agreement_to_csv(&report)? } else { agreement_to_structured(&report) })?;
    }
    if let Some(path) = args.confusion_csv {
        emit_confusion_csv(&report.disagreements.entity_type_confusion, path)?;
    }
    Ok(Status::Clean)
}

#[derive(Debug, Clone, PartialEq)]
pub enum MaskInput {
    Source(MaskSource),
    AnnotatorSpans,
}

/// File name for a document's masked text.
pub fn output_name(doc_id: &str) -> String {
    let safe: String =
        doc_id.chars().map(|c| if c.is_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect();
    format!("{safe}.txt")
}

pub struct MaskArgs<'a> {
    pub corpus: &'a Path,
    pub manifest: Option<&'a Path>,
    pub splits: &'a [Split],
    pub input: MaskInput,
    pub style: MaskStyle,
    pub out_dir: PathBuf,
    pub emit_masks: Option<&'a Path>,
}

pub fn mask(args: MaskArgs<'_>) -> Result<Status> {
    let full = load(args.corpus, args.manifest)?;
    let mut corpus = full.clone();
    restrict(&mut corpus, args.splits);
    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;

    let masker = match &args.input {
        MaskInput::Source(MaskSource::Masker(config)) => Some(Masker::new(config)?),
        _ => None,
    };
    let file_masks = match &args.input {
        MaskInput::Source(source @ MaskSource::File(_)) => Some(build_masks(source, &full, &corpus)?),
        _ => None,
    };

    let results: Vec<Result<SystemMask>> = corpus
        .documents
        .par_iter()
        .map(|doc| {
            let (spans, mask) = if let Some(m) = &masker {
                let (mask, mentions) = m.run(doc);
                let spans = mentions
                    .iter()
                    .map(|x| MaskSpan { start: x.start_offset, end: x.end_offset, entity_type: Some(x.entity_type) })
                    .collect();
                (spans, mask)
            } else if let Some(masks) = &file_masks {
                let mask = masks.get(&doc.doc_id).cloned().unwrap_or_else(|| SystemMask::empty(doc.doc_id.clone()));
                (system_mask_spans(doc, &mask), mask)
            } else {
                let spans = annotator_mask_spans(doc);
                let raw = spans.iter().map(|s| (s.start, s.end)).collect();
                let mask = SystemMask::from_spans(doc.doc_id.clone(), &doc.tokenization(), raw)
                    .with_context(|| format!("document {}", doc.doc_id))?;
                (spans, mask)
            };
            let text = apply_mask(&doc.text, &spans, &args.style).with_context(|| format!("document {}", doc.doc_id))?;
            write(&args.out_dir.join(output_name(&doc.doc_id)), text)?;
            Ok(mask)
        })
        .collect();
    let mut produced = MaskSet::new();
    for r in results {
        let m = r?;
        produced.insert(m.doc_id.clone(), m);
    }
    println!("{} document(s) written to {}", produced.len(), args.out_dir.display());
    if let Some(path) = args.emit_masks {
        save_masks(&produced, path)?;
    }
    Ok(Status::Clean)
}
