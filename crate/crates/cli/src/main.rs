//! `anonymeval`: evaluate text anonymization against annotated corpora.
//!
//! Exit codes: 0 success, 1 content findings (validation violations, no
//! comparable annotators), 2 operational failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use commands::{AgreementArgs, MaskArgs, MaskInput, Status};
use config::{parse_format, parse_splits, parse_style, resolve_corpus, resolve_mask_source, ConfigFile, EvaluateFlags, RunConfig};

#[derive(Parser)]
#[command(name = "anonymeval", version, about = "Evaluate text anonymization against annotated corpora")]
struct Cli {
    /// TOML config file; command-line flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for per-document work (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CorpusArgs {
    /// Corpus file or directory (default: config `corpus`, then $ANONYMEVAL_CORPUS_ROOT).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Sidecar JSON mapping doc_id to split.
    #[arg(long)]
    split_manifest: Option<PathBuf>,
    /// Restrict to these splits (comma separated: train, dev, test).
    #[arg(long, value_delimiter = ',')]
    splits: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a corpus against the schema and offset invariants.
    Validate {
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Corpus statistics.
    Stats {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        output: Option<PathBuf>,
        /// json or csv
        #[arg(long, default_value = "json")]
        format: String,
    },
    /// Score system masks against the annotations.
    Evaluate {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Masks file (character spans or token indices per document).
        #[arg(long, conflicts_with = "masker")]
        masks: Option<PathBuf>,
        /// Use the built-in rule-based masker as the system.
        #[arg(long)]
        masker: bool,
        /// uniform, unigram or external
        #[arg(long)]
        ic: Option<String>,
        /// IC exchange file for `--ic external`.
        #[arg(long)]
        ic_file: Option<PathBuf>,
        /// Treat documents without a mask as unmasked instead of failing.
        #[arg(long)]
        lenient: bool,
        #[arg(long)]
        output: Option<PathBuf>,
        /// json or csv
        #[arg(long)]
        format: Option<String>,
    },
    /// Inter-annotator agreement on documents with several annotators.
    Agreement {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        output: Option<PathBuf>,
        /// json or csv
        #[arg(long, default_value = "json")]
        format: String,
        /// Write the entity-type confusion matrix as CSV.
        #[arg(long)]
        confusion_csv: Option<PathBuf>,
    },
    /// Write masked copies of the documents, one text file each.
    Mask {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, conflicts_with_all = ["masker", "annotator_spans"])]
        masks: Option<PathBuf>,
        #[arg(long, conflicts_with = "annotator_spans")]
        masker: bool,
        /// Mask the union of all annotators' direct and quasi identifier spans.
        #[arg(long)]
        annotator_spans: bool,
        /// stars, tag or fixed
        #[arg(long)]
        style: Option<String>,
        /// Replacement text for `--style fixed`.
        #[arg(long)]
        placeholder: Option<String>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Also write the applied masks as a masks file.
        #[arg(long)]
        emit_masks: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<Status> {
    let config = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    if let Some(jobs) = cli.jobs.or(config.jobs) {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    let splits_or_config = |flags: &[String]| {
        if flags.is_empty() {
            parse_splits(config.splits.as_deref().unwrap_or_default())
        } else {
            parse_splits(flags)
        }
    };

    match cli.command {
        Command::Validate { corpus } => commands::validate(&resolve_corpus(corpus, &config)?),
        Command::Stats { corpus, output, format } => {
            let splits = splits_or_config(&corpus.splits)?;
            let manifest = corpus.split_manifest.or_else(|| config.split_manifest.clone());
            let path = resolve_corpus(corpus.corpus, &config)?;
            commands::stats(&path, manifest.as_deref(), &splits, output.as_deref(), parse_format(&format)?)
        }
        Command::Evaluate { corpus, masks, masker, ic, ic_file, lenient, output, format } => {
            let flags = EvaluateFlags {
                corpus: corpus.corpus,
                split_manifest: corpus.split_manifest,
                splits: corpus.splits,
                masks,
                masker,
                ic,
                ic_file,
                lenient,
                output,
                format,
            };
            commands::evaluate_cmd(&RunConfig::resolve(flags, &config)?)
        }
        Command::Agreement { corpus, output, format, confusion_csv } => {
            let splits = splits_or_config(&corpus.splits)?;
            let manifest = corpus.split_manifest.or_else(|| config.split_manifest.clone());
            let path = resolve_corpus(corpus.corpus, &config)?;
            commands::agreement(AgreementArgs {
                corpus: &path,
                manifest: manifest.as_deref(),
                splits: &splits,
                output: output.as_deref(),
                csv: parse_format(&format)?,
                confusion_csv: confusion_csv.as_deref(),
            })
        }
        Command::Mask { corpus, masks, masker, annotator_spans, style, placeholder, out_dir, emit_masks } => {
            let splits = splits_or_config(&corpus.splits)?;
            let manifest = corpus.split_manifest.or_else(|| config.split_manifest.clone());
            let path = resolve_corpus(corpus.corpus, &config)?;
            let input = if annotator_spans {
                MaskInput::AnnotatorSpans
            } else {
                MaskInput::Source(resolve_mask_source(masks, masker, &config)?)
            };
            let style_name = style.or_else(|| config.mask.style.clone()).unwrap_or_else(|| "stars".into());
            let style = parse_style(&style_name, placeholder.or_else(|| config.mask.placeholder.clone()))?;
            let Some(out_dir) = out_dir.or_else(|| config.mask.out_dir.clone()) else {
                bail!("no output directory: pass --out-dir or set mask.out_dir in the config file");
            };
            commands::mask(MaskArgs {
                corpus: &path,
                manifest: manifest.as_deref(),
                splits: &splits,
                input,
                style,
                out_dir,
                emit_masks: emit_masks.as_deref(),
            })
        }
    }
}

/// Error chain joined with ": ", skipping causes already spelled out by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut previous = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if previous.ends_with(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
        previous = text;
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Status::Clean) => ExitCode::SUCCESS,
        Ok(Status::Findings) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}
