//! The stages behind each subcommand. Pure stage functions (load, train
//! vocabulary, train model, build index, evaluate) are separated from the
//! `cmd_*` wrappers that add file IO and console output, so the ablation
//! grid and the test suite can drive the same code paths in memory.

use std::collections::BTreeMap;
use std::time::Instant;

use termsim_core::corpus::{
    assemble_product_text, build_training_pairs, normalize_text, Corpus,
};
use termsim_core::encoder::{EmbeddingModel, ModelVariant};
use termsim_core::index::{
    build_index, calibrate_gamma, collect_query_vocab, retrieve_accumulate, retrieve_exact,
    tokenize_products, IndexWarnings, ScoreStats, TermIndex,
};
use termsim_core::metrics::{collect_judgments, evaluate, EquivalenceMap, EvalReport};
use termsim_core::tokenizer::{
    tokenize, train_bpe, train_unigram, train_word, TokenSequence, TokenizerKind, Vocabulary,
};
use termsim_core::trainer::{train, Clock, TrainStats};

use crate::config::{GammaSpec, RunConfig};
use crate::error::{CliError, Result};
use crate::formats;
use crate::report::{self, CellMetrics, CellRow};
use crate::wands;

/// Wall clock for epoch timing, seconds since construction.
pub struct SystemClock {
    start: Instant,
}

impl SystemClock {
    pub fn new() -> SystemClock {
        SystemClock { start: Instant::now() }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock::new()
    }
}

impl Clock for SystemClock {
    fn now_seconds(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

/// Load and validate the dataset named by the config. Progress goes to
/// stderr so stdout stays reserved for each command's primary output.
pub fn load_data(cfg: &RunConfig, verbose: bool) -> Result<Corpus> {
    let (corpus, warnings, counts) =
        wands::load_corpus(&cfg.products, &cfg.queries, &cfg.labels)?;
    eprintln!(
        "loaded {} products, {} queries, {} labels",
        counts.products, counts.queries, counts.labels
    );
    if !warnings.dangling_labels.is_empty() {
        eprintln!(
            "dropped {} labels referencing unknown products or queries",
            warnings.dangling_labels.len()
        );
        if verbose {
            for l in warnings.dangling_labels.iter().take(10) {
                eprintln!("  dangling label: query {} product {}", l.query_id, l.product_id);
            }
        }
    }
    Ok(corpus)
}

/// Train the configured tokenizer on product texts plus query texts.
pub fn train_vocabulary(cfg: &RunConfig, corpus: &Corpus) -> Result<Vocabulary> {
    let mut texts: Vec<String> = corpus
        .products()
        .values()
        .map(|p| assemble_product_text(p, cfg.product_text))
        .collect();
    texts.extend(corpus.queries().values().map(|q| q.text.clone()));
    let specials = match &cfg.brands {
        Some(path) => wands::load_brand_list(path)?,
        None => Default::default(),
    };
    let vocab = match cfg.tokenizer_kind {
        TokenizerKind::Word => train_word(&texts, cfg.vocab_size, &specials)?,
        TokenizerKind::Bpe => train_bpe(&texts, cfg.vocab_size, &specials)?,
        TokenizerKind::Unigram => train_unigram(&texts, cfg.vocab_size, &specials, &cfg.unigram)?,
    };
    Ok(vocab)
}

pub fn cmd_train_tokenizer(cfg: &RunConfig, verbose: bool) -> Result<()> {
    let corpus = load_data(cfg, verbose)?;
    let vocab = train_vocabulary(cfg, &corpus)?;
    let path = cfg.artifact("vocab.bin");
    formats::write_vocab(&path, &vocab, &cfg.canonical_text())?;
    println!(
        "wrote {}: kind={} tokens={} specials={} fingerprint={:016x}",
        path.display(),
        vocab.kind().as_str(),
        vocab.len(),
        vocab.special_terms().len(),
        vocab.fingerprint()
    );
    Ok(())
}

/// Balanced pairs, fresh model, margin training.
pub fn train_model(
    cfg: &RunConfig,
    corpus: &Corpus,
    vocab: &Vocabulary,
) -> Result<(EmbeddingModel, TrainStats)> {
    let pairs = build_training_pairs(corpus.labels(), cfg.seed)?;
    eprintln!("{} balanced training pairs", pairs.len());
    let mut model = EmbeddingModel::init(cfg.variant, cfg.dim, vocab, cfg.seed);
    let stats = train(
        &mut model,
        &pairs,
        corpus,
        vocab,
        cfg.product_text,
        &cfg.train_config(),
        &SystemClock::new(),
    )?;
    Ok((model, stats))
}

pub fn cmd_train_encoder(cfg: &RunConfig, verbose: bool) -> Result<()> {
    let corpus = load_data(cfg, verbose)?;
    let (vocab, _) = formats::read_vocab(&cfg.artifact("vocab.bin"))?;
    let (model, stats) = train_model(cfg, &corpus, &vocab)?;
    if verbose {
        for (i, e) in stats.epochs.iter().enumerate() {
            eprintln!(
                "epoch {}: mean_loss={:.6} zero_loss={:.3} triplets={} skipped={} ({:.1}s)",
                i + 1,
                e.mean_loss,
                e.zero_loss_fraction,
                e.triplets,
                e.skipped_triplets,
                e.seconds
            );
        }
    }
    let path = cfg.artifact("model.bin");
    formats::write_model(&path, &model, &cfg.canonical_text())?;
    let log_path = report::write_train_log(cfg, &stats)?;
    let tail = stats
        .epochs
        .last()
        .map(|e| format!("final_mean_loss={:.6}", e.mean_loss))
        .unwrap_or_else(|| "no training epochs".to_string());
    println!(
        "wrote {}: variant={} dim={} epochs={} {} (log: {})",
        path.display(),
        model.variant().as_str(),
        model.dim(),
        stats.epochs.len(),
        tail,
        log_path.display()
    );
    Ok(())
}

/// The threshold actually applied, plus calibration statistics when the
/// config asked for a calibrated value.
pub struct GammaResolution {
    pub gamma: f64,
    pub stats: Option<ScoreStats>,
}

pub fn resolve_gamma(
    cfg: &RunConfig,
    model: &EmbeddingModel,
    vocab: &Vocabulary,
    product_tokens: &BTreeMap<u32, TokenSequence>,
    query_vocab: &std::collections::BTreeSet<u32>,
) -> Result<GammaResolution> {
    let calibrate = || {
        calibrate_gamma(
            model,
            vocab,
            product_tokens,
            query_vocab,
            cfg.calibration_target,
            cfg.calibration_sample,
            cfg.seed,
        )
    };
    Ok(match cfg.gamma {
        GammaSpec::NegInfinity => GammaResolution { gamma: f64::NEG_INFINITY, stats: None },
        GammaSpec::Fixed(v) => GammaResolution { gamma: v, stats: None },
        GammaSpec::Calibrated => {
            let (gamma, stats) = calibrate()?;
            GammaResolution { gamma, stats: Some(stats) }
        }
        GammaSpec::CalibratedPlusStd => {
            let (gamma, stats) = calibrate()?;
            GammaResolution { gamma: gamma + stats.std, stats: Some(stats) }
        }
    })
}

pub fn build_term_index(
    cfg: &RunConfig,
    corpus: &Corpus,
    vocab: &Vocabulary,
    model: &EmbeddingModel,
) -> Result<(TermIndex, IndexWarnings, GammaResolution)> {
    let product_tokens = tokenize_products(corpus, vocab, cfg.product_text);
    let query_vocab = collect_query_vocab(corpus, vocab);
    let resolution = resolve_gamma(cfg, model, vocab, &product_tokens, &query_vocab)?;
    let (index, warnings) = build_index(model, vocab, &product_tokens, &query_vocab, resolution.gamma)?;
    Ok((index, warnings, resolution))
}

fn describe_postings(index: &TermIndex) -> String {
    let mut lens: Vec<usize> = index.postings().values().map(Vec::len).collect();
    lens.sort_unstable();
    if lens.is_empty() {
        return "posting lists: none".to_string();
    }
    let pick = |q: f64| lens[((lens.len() - 1) as f64 * q).round() as usize];
    let mean = lens.iter().sum::<usize>() as f64 / lens.len() as f64;
    let fraction = mean / index.product_count().max(1) as f64;
    format!(
        "posting lists: {} terms, len min={} p50={} p90={} max={} mean={:.1} ({:.2}% of products)",
        lens.len(),
        lens[0],
        pick(0.5),
        pick(0.9),
        lens[lens.len() - 1],
        mean,
        fraction * 100.0
    )
}

pub fn cmd_build_index(cfg: &RunConfig, verbose: bool) -> Result<()> {
    let corpus = load_data(cfg, verbose)?;
    let (vocab, _) = formats::read_vocab(&cfg.artifact("vocab.bin"))?;
    let (model, _) = formats::read_model(&cfg.artifact("model.bin"))?;
    model.verify_vocab(&vocab)?;
    let (index, warnings, resolution) = build_term_index(cfg, &corpus, &vocab, &model)?;
    if !warnings.empty_products.is_empty() {
        eprintln!("{} products tokenized to nothing and were skipped", warnings.empty_products.len());
    }
    if warnings.empty_query_vocab {
        eprintln!("query vocabulary is empty; the index has no terms");
    }
    let path = cfg.artifact("index.bin");
    formats::write_index(&path, &index, &cfg.canonical_text())?;
    match resolution.stats {
        Some(s) => println!(
            "gamma={} (calibrated: score mean={:.6} std={:.6})",
            index.gamma(),
            s.mean,
            s.std
        ),
        None => println!("gamma={}", index.gamma()),
    }
    println!("{}", describe_postings(&index));
    println!(
        "wrote {}: {} postings over {} products",
        path.display(),
        index.posting_count(),
        index.product_count()
    );
    Ok(())
}

pub fn cmd_search(cfg: &RunConfig, query: &str, top_k: usize, verbose: bool) -> Result<()> {
    let (vocab, _) = formats::read_vocab(&cfg.artifact("vocab.bin"))?;
    let (model, _) = formats::read_model(&cfg.artifact("model.bin"))?;
    let (index, _) = formats::read_index(&cfg.artifact("index.bin"))?;
    index.verify(&model, &vocab)?;
    let corpus = load_data(cfg, verbose)?;
    let q_tokens = tokenize(&vocab, &normalize_text(query));
    if verbose {
        eprintln!("query tokens ({}): {:?}", q_tokens.ids.len(), q_tokens.surfaces);
    }
    if q_tokens.ids.is_empty() {
        return Err(CliError::Data(format!("query '{query}' tokenized to nothing")));
    }
    let modes = cfg.mode.runs();
    let product_tokens = if modes.contains(&"exact") {
        Some(tokenize_products(&corpus, &vocab, cfg.product_text))
    } else {
        None
    };
    for mode in &modes {
        let result = match *mode {
            "accumulate" => retrieve_accumulate(&index, &q_tokens, Some(top_k)),
            _ => retrieve_exact(
                &index,
                &model,
                &q_tokens,
                product_tokens.as_ref().expect("tokenized for exact mode"),
                Some(top_k),
            )?,
        };
        if modes.len() > 1 {
            println!("# mode: {mode}");
        }
        for (rank, &(pid, score)) in result.ranked.iter().enumerate() {
            let title = corpus.product(pid).map(|p| p.title.as_str()).unwrap_or("(unknown)");
            println!("{}\t{}\t{}\t{:.6}", rank + 1, pid, title, score);
        }
    }
    Ok(())
}

/// Evaluation of one rescoring mode.
pub struct ModeEval {
    pub mode: &'static str,
    pub report: EvalReport,
}

/// Run retrieval for every corpus query and score it against the judgments,
/// once per configured rescoring mode.
pub fn evaluate_index(
    cfg: &RunConfig,
    corpus: &Corpus,
    vocab: &Vocabulary,
    model: &EmbeddingModel,
    index: &TermIndex,
) -> Result<Vec<ModeEval>> {
    let judgments = collect_judgments(corpus, cfg.include_partial);
    let eq = EquivalenceMap::from_corpus(corpus);
    let cap = cfg.ks.iter().copied().max().unwrap_or(1000);
    let modes = cfg.mode.runs();
    let product_tokens = if modes.contains(&"exact") {
        Some(tokenize_products(corpus, vocab, cfg.product_text))
    } else {
        None
    };
    let mut out = Vec::new();
    for mode in modes {
        let mut run: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for (&qid, q) in corpus.queries() {
            let q_tokens = tokenize(vocab, &q.text);
            let result = match mode {
                "accumulate" => retrieve_accumulate(index, &q_tokens, Some(cap)),
                _ => retrieve_exact(
                    index,
                    model,
                    &q_tokens,
                    product_tokens.as_ref().expect("tokenized for exact mode"),
                    Some(cap),
                )?,
            };
            run.insert(qid, result.ids());
        }
        let report = evaluate(&run, &judgments, &eq, &cfg.ks)?;
        out.push(ModeEval { mode, report });
    }
    Ok(out)
}

fn print_aggregates(mode: &str, report: &EvalReport) {
    let mut line = format!("mode={mode} evaluated={}", report.evaluated);
    for a in &report.aggregates {
        line.push_str(&format!(
            " | k={}: P={:.4} R={:.4} mAP={:.4}",
            a.k, a.precision, a.recall, a.map
        ));
    }
    println!("{line}");
}

pub fn cmd_evaluate(cfg: &RunConfig, verbose: bool) -> Result<()> {
    let corpus = load_data(cfg, verbose)?;
    let (vocab, _) = formats::read_vocab(&cfg.artifact("vocab.bin"))?;
    let (model, _) = formats::read_model(&cfg.artifact("model.bin"))?;
    let (index, _) = formats::read_index(&cfg.artifact("index.bin"))?;
    index.verify(&model, &vocab)?;
    let evals = evaluate_index(cfg, &corpus, &vocab, &model, &index)?;
    for e in &evals {
        let (per_query, summary) = report::write_eval_reports(cfg, e.mode, &e.report)?;
        print_aggregates(e.mode, &e.report);
        println!("wrote {} and {}", per_query.display(), summary.display());
    }
    Ok(())
}

fn cell_name(kind: TokenizerKind, mt: bool, dim: usize, variant: ModelVariant) -> String {
    format!(
        "{}-{}-d{}-{}",
        kind.as_str(),
        if mt { "mt" } else { "plain" },
        dim,
        variant.as_str()
    )
}

/// One full pipeline pass for a grid cell, writing the cell's artifacts and
/// reports under its own output directory. Vocabularies depend only on
/// (kind, mt), so they are trained once per pair and reused.
fn run_cell(
    cell: &RunConfig,
    corpus: &Corpus,
    vocab_cache: &mut BTreeMap<(TokenizerKind, bool), Vocabulary>,
    k_small: usize,
    k_large: usize,
) -> Result<CellMetrics> {
    let key = (cell.tokenizer_kind, cell.is_mt());
    if !vocab_cache.contains_key(&key) {
        vocab_cache.insert(key, train_vocabulary(cell, corpus)?);
    }
    let vocab = vocab_cache[&key].clone();
    formats::write_vocab(&cell.artifact("vocab.bin"), &vocab, &cell.canonical_text())?;
    let (model, stats) = train_model(cell, corpus, &vocab)?;
    formats::write_model(&cell.artifact("model.bin"), &model, &cell.canonical_text())?;
    report::write_train_log(cell, &stats)?;
    let (index, _, _) = build_term_index(cell, corpus, &vocab, &model)?;
    formats::write_index(&cell.artifact("index.bin"), &index, &cell.canonical_text())?;
    let evals = evaluate_index(cell, corpus, &vocab, &model, &index)?;
    for e in &evals {
        report::write_eval_reports(cell, e.mode, &e.report)?;
    }
    let head = &evals[0].report;
    let at = |k: usize| head.aggregates.iter().find(|a| a.k == k);
    let map_small = at(k_small).map(|a| a.map).unwrap_or(0.0);
    let recall_large = at(k_large).map(|a| a.recall).unwrap_or(0.0);
    Ok(CellMetrics { map_small, recall_large })
}

pub fn cmd_ablate(cfg: &RunConfig, verbose: bool) -> Result<()> {
    if cfg.ablate_mt.contains(&true) && cfg.brands.is_none() {
        return Err(CliError::Config(
            "ablate.mt includes true but tokenizer.brands is not set".into(),
        ));
    }
    let corpus = load_data(cfg, verbose)?;
    let k_small = *cfg.ks.iter().min().expect("validated non-empty");
    let k_large = *cfg.ks.iter().max().expect("validated non-empty");
    let total = cfg.ablate_tokenizers.len()
        * cfg.ablate_mt.len()
        * cfg.ablate_dims.len()
        * cfg.ablate_variants.len();
    let mut vocab_cache = BTreeMap::new();
    let mut rows: Vec<CellRow> = Vec::new();
    for &kind in &cfg.ablate_tokenizers {
        for &mt in &cfg.ablate_mt {
            for &dim in &cfg.ablate_dims {
                for &variant in &cfg.ablate_variants {
                    let name = cell_name(kind, mt, dim, variant);
                    let mut cell = cfg.clone();
                    cell.tokenizer_kind = kind;
                    if !mt {
                        cell.brands = None;
                    }
                    cell.dim = dim;
                    cell.variant = variant;
                    cell.out_dir = cfg.out_dir.join(&name);
                    let metrics = run_cell(&cell, &corpus, &mut vocab_cache, k_small, k_large)
                        .map_err(|e| e.to_string());
                    match &metrics {
                        Ok(m) => eprintln!(
                            "cell {}/{} {}: mAP@{}={:.4} R@{}={:.4}",
                            rows.len() + 1,
                            total,
                            name,
                            k_small,
                            m.map_small,
                            k_large,
                            m.recall_large
                        ),
                        Err(e) => eprintln!("cell {}/{} {}: failed: {}", rows.len() + 1, total, name, e),
                    }
                    rows.push(CellRow {
                        name,
                        tokenizer: kind.as_str().to_string(),
                        mt,
                        dim,
                        variant: variant.as_str().to_string(),
                        metrics,
                    });
                }
            }
        }
    }
    let mode = cfg.mode.runs()[0];
    let table = report::render_ablation_table(cfg, &rows, k_small, k_large, mode);
    let path = cfg.artifact("ablation.tsv");
    report::write_text(&path, &table)?;
    print!("{table}");
    println!("wrote {}", path.display());
    Ok(())
}
