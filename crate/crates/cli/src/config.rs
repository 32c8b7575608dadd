//! Config file schema and resolution of effective settings.
//!
//! Precedence: command-line flag, then config file, then environment
//! (corpus location only), then built-in default.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anonymeval_core::masker::MaskerConfig;
use anonymeval_core::{MaskPolicy, MaskStyle, Split};
use anyhow::{bail, Context, Result};
use serde::Deserialize;

pub const CORPUS_ENV: &str = "ANONYMEVAL_CORPUS_ROOT";

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub corpus: Option<PathBuf>,
    pub split_manifest: Option<PathBuf>,
    pub splits: Option<Vec<String>>,
    pub jobs: Option<usize>,
    pub evaluate: EvaluateSection,
    pub mask: MaskSection,
    pub masker: MaskerConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub masks: Option<PathBuf>,
    pub use_masker: Option<bool>,
    pub ic: Option<String>,
    pub ic_file: Option<PathBuf>,
    pub lenient: Option<bool>,
    pub output: Option<PathBuf>,
    pub format: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskSection {
    pub style: Option<String>,
    pub placeholder: Option<String>,
    pub out_dir: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&raw).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Corpus location from flag, config or environment.
pub fn resolve_corpus(flag: Option<PathBuf>, config: &ConfigFile) -> Result<PathBuf> {
    if let Some(p) = flag.or_else(|| config.corpus.clone()) {
        return Ok(p);
    }
    match std::env::var_os(CORPUS_ENV) {
        Some(p) if !p.is_empty() => Ok(PathBuf::from(p)),
        _ => bail!("no corpus given: pass --corpus, set `corpus` in the config file or set {CORPUS_ENV}"),
    }
}

pub fn parse_splits(raw: &[String]) -> Result<Vec<Split>> {
    raw.iter()
        .flat_map(|s| s.split(','))
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| Split::from_str(s).map_err(anyhow::Error::from))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum MaskSource {
    File(PathBuf),
    Masker(MaskerConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub enum IcSelection {
    Uniform,
    Unigram,
    External(PathBuf),
}

/// Fully resolved settings of an evaluation run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub split_manifest: Option<PathBuf>,
    pub splits: Vec<Split>,
    pub mask_source: MaskSource,
    pub ic: IcSelection,
    pub output: Option<PathBuf>,
    pub csv: bool,
    pub policy: MaskPolicy,
}

/// Flags that feed a [`RunConfig`]; `None` means "not given on the command line".
#[derive(Debug, Default, Clone)]
pub struct EvaluateFlags {
    pub corpus: Option<PathBuf>,
    pub split_manifest: Option<PathBuf>,
    pub splits: Vec<String>,
    pub masks: Option<PathBuf>,
    pub masker: bool,
    pub ic: Option<String>,
    pub ic_file: Option<PathBuf>,
    pub lenient: bool,
    pub output: Option<PathBuf>,
    pub format: Option<String>,
}

pub fn resolve_mask_source(masks: Option<PathBuf>, masker: bool, config: &ConfigFile) -> Result<MaskSource> {
    match (masks, masker) {
        (Some(_), true) => bail!("give either --masks or --masker, not both"),
        (Some(p), false) => return Ok(MaskSource::File(p)),
        (None, true) => return Ok(MaskSource::Masker(config.masker.clone())),
        (None, false) => {}
    }
    match (&config.evaluate.masks, config.evaluate.use_masker.unwrap_or(false)) {
        (Some(_), true) => bail!("config sets both evaluate.masks and evaluate.use_masker; choose one mask source"),
        (Some(p), false) => Ok(MaskSource::File(p.clone())),
        (None, true) => Ok(MaskSource::Masker(config.masker.clone())),
        (None, false) => bail!("no mask source: pass --masks FILE or --masker"),
    }
}

fn parse_ic(name: &str, file: Option<PathBuf>) -> Result<IcSelection> {
    match name {
        "uniform" => Ok(IcSelection::Uniform),
        "unigram" => Ok(IcSelection::Unigram),
        "external" => match file {
            Some(p) => Ok(IcSelection::External(p)),
            None => bail!("--ic external needs --ic-file"),
        },
        other => bail!("unknown IC provider {other:?} (expected uniform, unigram or external)"),
    }
}

pub fn parse_format(name: &str) -> Result<bool> {
    match name {
        "json" => Ok(false),
        "csv" => Ok(true),
        other => bail!("unknown format {other:?} (expected json or csv)"),
    }
}

impl RunConfig {
    pub fn resolve(flags: EvaluateFlags, config: &ConfigFile) -> Result<Self> {
        let corpus = resolve_corpus(flags.corpus, config)?;
        let splits = if flags.splits.is_empty() {
            parse_splits(config.splits.as_deref().unwrap_or_default())?
        } else {
            parse_splits(&flags.splits)?
        };
        let mask_source = resolve_mask_source(flags.masks, flags.masker, config)?;
        let ic_name = flags.ic.or_else(|| config.evaluate.ic.clone()).unwrap_or_else(|| "uniform".into());
        let ic = parse_ic(&ic_name, flags.ic_file.or_else(|| config.evaluate.ic_file.clone()))?;
        let format = flags.format.or_else(|| config.evaluate.format.clone()).unwrap_or_else(|| "json".into());
        let lenient = flags.lenient || config.evaluate.lenient.unwrap_or(false);
        Ok(Self {
            corpus,
            split_manifest: flags.split_manifest.or_else(|| config.split_manifest.clone()),
            splits,
            mask_source,
            ic,
            output: flags.output.or_else(|| config.evaluate.output.clone()),
            csv: parse_format(&format)?,
            policy: if lenient { MaskPolicy::Lenient } else { MaskPolicy::Strict },
        })
    }
}

pub fn parse_style(style: &str, placeholder: Option<String>) -> Result<MaskStyle> {
    match style {
        "stars" => Ok(MaskStyle::Stars),
        "tag" | "category-tag" => Ok(MaskStyle::CategoryTag),
        "fixed" | "fixed-token" => Ok(MaskStyle::FixedToken(placeholder.unwrap_or_else(|| "***".into()))),
        other => bail!("unknown mask style {other:?} (expected stars, tag or fixed)"),
    }
}
