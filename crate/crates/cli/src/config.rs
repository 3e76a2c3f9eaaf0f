//! Run configuration: a sectioned key=value file plus command-line
//! overrides, resolved into one typed struct whose canonical text is
//! embedded in every artifact the pipeline writes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use termsim_core::corpus::ProductTextMode;
use termsim_core::encoder::ModelVariant;
use termsim_core::tokenizer::{TokenizerKind, UnigramParams};
use termsim_core::trainer::{Optimizer, TrainConfig};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSpec {
    Calibrated,
    CalibratedPlusStd,
    NegInfinity,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RescoreMode {
    Accumulate,
    Exact,
    Both,
}

impl RescoreMode {
    pub fn runs(self) -> Vec<&'static str> {
        match self {
            RescoreMode::Accumulate => vec!["accumulate"],
            RescoreMode::Exact => vec!["exact"],
            RescoreMode::Both => vec!["accumulate", "exact"],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub products: PathBuf,
    pub queries: PathBuf,
    pub labels: PathBuf,
    pub product_text: ProductTextMode,

    pub tokenizer_kind: TokenizerKind,
    pub vocab_size: usize,
    pub brands: Option<PathBuf>,
    pub unigram: UnigramParams,

    pub variant: ModelVariant,
    pub dim: usize,

    pub margin: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer_kind: String,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,

    pub gamma: GammaSpec,
    pub calibration_target: f64,
    pub calibration_sample: usize,

    pub ks: Vec<usize>,
    pub mode: RescoreMode,
    pub include_partial: bool,

    pub ablate_tokenizers: Vec<TokenizerKind>,
    pub ablate_mt: Vec<bool>,
    pub ablate_dims: Vec<usize>,
    pub ablate_variants: Vec<ModelVariant>,

    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            products: "data/products.tsv".into(),
            queries: "data/queries.tsv".into(),
            labels: "data/labels.tsv".into(),
            product_text: ProductTextMode::TitleAndDescription,
            tokenizer_kind: TokenizerKind::Bpe,
            vocab_size: 8000,
            brands: None,
            unigram: UnigramParams::default(),
            variant: ModelVariant::H1,
            dim: 64,
            margin: 1.0,
            learning_rate: 1e-3,
            batch_size: 256,
            epochs: 10,
            optimizer_kind: "adam".to_string(),
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            gamma: GammaSpec::Calibrated,
            calibration_target: 0.01,
            calibration_sample: 2000,
            ks: vec![12, 1000],
            mode: RescoreMode::Both,
            include_partial: false,
            ablate_tokenizers: vec![TokenizerKind::Bpe, TokenizerKind::Unigram, TokenizerKind::Word],
            ablate_mt: vec![true, false],
            ablate_dims: vec![32, 64, 128],
            ablate_variants: vec![ModelVariant::H1, ModelVariant::De, ModelVariant::Se],
            out_dir: "out".into(),
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Loads `path` (when given), then applies `section.key=value` overrides
    /// and finally the seed override. Overrides win over the file.
    pub fn load(
        path: Option<&Path>,
        overrides: &[String],
        seed: Option<u64>,
    ) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = path {
            let text =
                std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            for (lineno, section, key, value) in parse_entries(&text)? {
                cfg.set(&section, &key, &value)
                    .map_err(|e| prefix_line(e, lineno))?;
            }
        }
        for item in overrides {
            let (path_part, value) = item.split_once('=').ok_or_else(|| {
                CliError::Config(format!("override '{item}' is not section.key=value"))
            })?;
            let (section, key) = path_part.split_once('.').ok_or_else(|| {
                CliError::Config(format!("override '{item}' is not section.key=value"))
            })?;
            cfg.set(section.trim(), key.trim(), value.trim())?;
        }
        if let Some(seed) = seed {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.ks.is_empty() {
            return Err(CliError::Config("eval.ks must list at least one cutoff".into()));
        }
        if self.ks.iter().any(|&k| k == 0) {
            return Err(CliError::Config("eval.ks entries must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.calibration_target) {
            return Err(CliError::Config(
                "index.calibration_target must lie in [0, 1]".into(),
            ));
        }
        for (name, list_empty) in [
            ("ablate.tokenizers", self.ablate_tokenizers.is_empty()),
            ("ablate.mt", self.ablate_mt.is_empty()),
            ("ablate.dims", self.ablate_dims.is_empty()),
            ("ablate.variants", self.ablate_variants.is_empty()),
        ] {
            if list_empty {
                return Err(CliError::Config(format!("{name} must not be empty")));
            }
        }
        Ok(())
    }

    fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let fail = || CliError::Config(format!("bad value '{value}' for {section}.{key}"));
        match (section, key) {
            ("data", "products") => self.products = value.into(),
            ("data", "queries") => self.queries = value.into(),
            ("data", "labels") => self.labels = value.into(),
            ("data", "product_text") => {
                self.product_text = match value {
                    "title" => ProductTextMode::TitleOnly,
                    "title_description" => ProductTextMode::TitleAndDescription,
                    _ => return Err(fail()),
                }
            }
            ("tokenizer", "kind") => self.tokenizer_kind = parse_kind(value).ok_or_else(fail)?,
            ("tokenizer", "vocab_size") => self.vocab_size = value.parse().map_err(|_| fail())?,
            ("tokenizer", "brands") => {
                self.brands = match value {
                    "" | "none" => None,
                    v => Some(v.into()),
                }
            }
            ("tokenizer", "unigram_seed_multiplier") => {
                self.unigram.seed_multiplier = value.parse().map_err(|_| fail())?
            }
            ("tokenizer", "unigram_prune_fraction") => {
                self.unigram.prune_fraction = value.parse().map_err(|_| fail())?
            }
            ("tokenizer", "unigram_max_piece_len") => {
                self.unigram.max_piece_len = value.parse().map_err(|_| fail())?
            }
            ("tokenizer", "unigram_em_rounds") => {
                self.unigram.em_rounds = value.parse().map_err(|_| fail())?
            }
            ("model", "variant") => self.variant = parse_variant(value).ok_or_else(fail)?,
            ("model", "dim") => self.dim = value.parse().map_err(|_| fail())?,
            ("train", "margin") => self.margin = value.parse().map_err(|_| fail())?,
            ("train", "learning_rate") => {
                self.learning_rate = value.parse().map_err(|_| fail())?
            }
            ("train", "batch_size") => self.batch_size = value.parse().map_err(|_| fail())?,
            ("train", "epochs") => self.epochs = value.parse().map_err(|_| fail())?,
            ("train", "optimizer") => {
                if value != "adam" && value != "sgd" {
                    return Err(fail());
                }
                self.optimizer_kind = value.to_string();
            }
            ("train", "adam_beta1") => self.adam_beta1 = value.parse().map_err(|_| fail())?,
            ("train", "adam_beta2") => self.adam_beta2 = value.parse().map_err(|_| fail())?,
            ("train", "adam_epsilon") => self.adam_epsilon = value.parse().map_err(|_| fail())?,
            ("index", "gamma") => {
                self.gamma = match value {
                    "calibrated" => GammaSpec::Calibrated,
                    "calibrated+std" => GammaSpec::CalibratedPlusStd,
                    "-inf" => GammaSpec::NegInfinity,
                    v => GammaSpec::Fixed(v.parse().map_err(|_| fail())?),
                }
            }
            ("index", "calibration_target") => {
                self.calibration_target = value.parse().map_err(|_| fail())?
            }
            ("index", "calibration_sample") => {
                self.calibration_sample = value.parse().map_err(|_| fail())?
            }
            ("eval", "ks") => {
                self.ks = parse_list(value, |v| v.parse().ok()).ok_or_else(fail)?
            }
            ("eval", "mode") => {
                self.mode = match value {
                    "accumulate" => RescoreMode::Accumulate,
                    "exact" => RescoreMode::Exact,
                    "both" => RescoreMode::Both,
                    _ => return Err(fail()),
                }
            }
            ("eval", "include_partial") => {
                self.include_partial = value.parse().map_err(|_| fail())?
            }
            ("ablate", "tokenizers") => {
                self.ablate_tokenizers = parse_list(value, parse_kind).ok_or_else(fail)?
            }
            ("ablate", "mt") => {
                self.ablate_mt = parse_list(value, |v| v.parse().ok()).ok_or_else(fail)?
            }
            ("ablate", "dims") => {
                self.ablate_dims = parse_list(value, |v| v.parse().ok()).ok_or_else(fail)?
            }
            ("ablate", "variants") => {
                self.ablate_variants = parse_list(value, parse_variant).ok_or_else(fail)?
            }
            ("output", "dir") => self.out_dir = value.into(),
            ("run", "seed") => self.seed = value.parse().map_err(|_| fail())?,
            _ => {
                return Err(CliError::Config(format!(
                    "unknown configuration key {section}.{key}"
                )))
            }
        }
        Ok(())
    }

    /// The fully resolved configuration as sectioned text, suitable both for
    /// artifact headers and as a loadable file.
    pub fn canonical_text(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "[data]\nproducts = {}\nqueries = {}\nlabels = {}\nproduct_text = {}\n",
            self.products.display(),
            self.queries.display(),
            self.labels.display(),
            match self.product_text {
                ProductTextMode::TitleOnly => "title",
                ProductTextMode::TitleAndDescription => "title_description",
            }
        );
        let _ = write!(
            s,
            "[tokenizer]\nkind = {}\nvocab_size = {}\nbrands = {}\n\
             unigram_seed_multiplier = {}\nunigram_prune_fraction = {}\n\
             unigram_max_piece_len = {}\nunigram_em_rounds = {}\n",
            self.tokenizer_kind.as_str(),
            self.vocab_size,
            self.brands
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "none".to_string()),
            self.unigram.seed_multiplier,
            self.unigram.prune_fraction,
            self.unigram.max_piece_len,
            self.unigram.em_rounds,
        );
        let _ = write!(
            s,
            "[model]\nvariant = {}\ndim = {}\n",
            self.variant.as_str(),
            self.dim
        );
        let _ = write!(
            s,
            "[train]\nmargin = {}\nlearning_rate = {}\nbatch_size = {}\nepochs = {}\n\
             optimizer = {}\nadam_beta1 = {}\nadam_beta2 = {}\nadam_epsilon = {}\n",
            self.margin,
            self.learning_rate,
            self.batch_size,
            self.epochs,
            self.optimizer_kind,
            self.adam_beta1,
            self.adam_beta2,
            self.adam_epsilon,
        );
        let _ = write!(
            s,
            "[index]\ngamma = {}\ncalibration_target = {}\ncalibration_sample = {}\n",
            match self.gamma {
                GammaSpec::Calibrated => "calibrated".to_string(),
                GammaSpec::CalibratedPlusStd => "calibrated+std".to_string(),
                GammaSpec::NegInfinity => "-inf".to_string(),
                GammaSpec::Fixed(v) => format!("{v}"),
            },
            self.calibration_target,
            self.calibration_sample,
        );
        let _ = write!(
            s,
            "[eval]\nks = {}\nmode = {}\ninclude_partial = {}\n",
            join(&self.ks, |k| k.to_string()),
            match self.mode {
                RescoreMode::Accumulate => "accumulate",
                RescoreMode::Exact => "exact",
                RescoreMode::Both => "both",
            },
            self.include_partial,
        );
        let _ = write!(
            s,
            "[ablate]\ntokenizers = {}\nmt = {}\ndims = {}\nvariants = {}\n",
            join(&self.ablate_tokenizers, |k| k.as_str().to_string()),
            join(&self.ablate_mt, |b| b.to_string()),
            join(&self.ablate_dims, |d| d.to_string()),
            join(&self.ablate_variants, |v| v.as_str().to_string()),
        );
        let _ = write!(
            s,
            "[output]\ndir = {}\n[run]\nseed = {}\n",
            self.out_dir.display(),
            self.seed
        );
        s
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            margin: self.margin,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
            optimizer: if self.optimizer_kind == "sgd" {
                Optimizer::Sgd
            } else {
                Optimizer::Adam {
                    beta1: self.adam_beta1,
                    beta2: self.adam_beta2,
                    epsilon: self.adam_epsilon,
                }
            },
        }
    }

    pub fn is_mt(&self) -> bool {
        self.brands.is_some()
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

fn parse_kind(v: &str) -> Option<TokenizerKind> {
    match v {
        "word" => Some(TokenizerKind::Word),
        "bpe" => Some(TokenizerKind::Bpe),
        "unigram" => Some(TokenizerKind::Unigram),
        _ => None,
    }
}

fn parse_variant(v: &str) -> Option<ModelVariant> {
    match v {
        "h1" => Some(ModelVariant::H1),
        "de" => Some(ModelVariant::De),
        "se" => Some(ModelVariant::Se),
        _ => None,
    }
}

fn parse_list<T>(value: &str, item: impl Fn(&str) -> Option<T>) -> Option<Vec<T>> {
    let parts: Vec<&str> = value.split(',').map(str::trim).filter(|p| !p.is_empty()).collect();
    if parts.is_empty() {
        return None;
    }
    parts.into_iter().map(item).collect()
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(",")
}

fn prefix_line(e: CliError, lineno: usize) -> CliError {
    match e {
        CliError::Config(msg) => CliError::Config(format!("line {lineno}: {msg}")),
        other => other,
    }
}

/// Flat `key = value` entries grouped under `[section]` headers. `#` and `;`
/// start comments; blank lines are ignored.
fn parse_entries(text: &str) -> Result<Vec<(usize, String, String, String)>> {
    let mut entries = Vec::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_string();
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!("line {lineno}: expected 'key = value', got '{line}'"))
        })?;
        if section.is_empty() {
            return Err(CliError::Config(format!(
                "line {lineno}: key '{}' appears before any [section]",
                key.trim()
            )));
        }
        entries.push((
            lineno,
            section.clone(),
            key.trim().to_string(),
            value.trim().to_string(),
        ));
    }
    Ok(entries)
}

/// Round-trip helper used by tests and by `evaluate` when echoing reports.
pub fn parse_canonical(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    for (lineno, section, key, value) in parse_entries(text)? {
        cfg.set(&section, &key, &value)
            .map_err(|e| prefix_line(e, lineno))?;
    }
    cfg.validate()?;
    Ok(cfg)
}
