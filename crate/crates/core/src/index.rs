//! Threshold-gated term index and retrieval over it.
//!
//! Construction: collect the query-token vocabulary, score every (query
//! token, product) pair with the single-token specialization of the model's
//! similarity (max over product-token dots for H1, dot with the mean
//! product vector for DE/SE), and keep pairs whose score exceeds the
//! threshold. Retrieval unions the posting lists of the query's tokens and
//! ranks by either accumulated stored scores or a full rescore.
//!
//! Posting scores are stored in single precision; the threshold gate is
//! applied to the quantized value, so the stored-score > threshold
//! invariant holds exactly on what the index contains.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::corpus::{Corpus, ProductTextMode};
use crate::encoder::{self, dot, EmbeddingModel, ModelVariant, Side};
use crate::rng::Stream;
use crate::tokenizer::{tokenize, TokenSequence, Vocabulary};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostingEntry {
    pub product_id: u32,
    pub score: f32,
}

/// Inverted index from query-token id to products scoring above the
/// threshold. Every token of the query vocabulary has an entry, possibly
/// empty.
#[derive(Debug, Clone, PartialEq)]
pub struct TermIndex {
    gamma: f64,
    postings: BTreeMap<u32, Vec<PostingEntry>>,
    vocab_fingerprint: u64,
    model_fingerprint: u64,
    product_count: usize,
}

/// Non-fatal conditions observed while building.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IndexWarnings {
    /// Products skipped because they tokenized to nothing.
    pub empty_products: Vec<u32>,
    pub empty_query_vocab: bool,
}

/// Mean and standard deviation of the sampled per-token score distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreStats {
    pub mean: f64,
    pub std: f64,
}

/// Ranked products, best first; ties broken by ascending product id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RetrievalResult {
    pub ranked: Vec<(u32, f64)>,
}

impl RetrievalResult {
    pub fn ids(&self) -> Vec<u32> {
        self.ranked.iter().map(|&(p, _)| p).collect()
    }
}

/// Distinct token ids appearing in any query.
pub fn collect_query_vocab(corpus: &Corpus, vocab: &Vocabulary) -> BTreeSet<u32> {
    let mut out = BTreeSet::new();
    for query in corpus.queries().values() {
        out.extend(tokenize(vocab, &query.text).ids);
    }
    out
}

/// Tokenize every product once, keyed by id.
pub fn tokenize_products(
    corpus: &Corpus,
    vocab: &Vocabulary,
    mode: ProductTextMode,
) -> BTreeMap<u32, TokenSequence> {
    corpus
        .products()
        .iter()
        .map(|(&pid, product)| {
            let text = crate::corpus::assemble_product_text(product, mode);
            (pid, tokenize(vocab, &text))
        })
        .collect()
}

/// Per-product data sufficient to score any single query token against it.
enum Profile {
    /// Distinct product-token rows, flattened (H1: max over rows).
    Rows(Vec<f64>),
    /// Mean of all product-token rows (DE/SE: single dot).
    Mean(Vec<f64>),
}

fn product_profile(model: &EmbeddingModel, tokens: &TokenSequence) -> Option<Profile> {
    if tokens.is_empty() {
        return None;
    }
    match model.variant() {
        ModelVariant::H1 => {
            let distinct: BTreeSet<u32> = tokens.ids.iter().copied().collect();
            let mut flat = Vec::with_capacity(distinct.len() * model.dim());
            for id in distinct {
                flat.extend_from_slice(model.row(Side::Product, id));
            }
            Some(Profile::Rows(flat))
        }
        ModelVariant::De | ModelVariant::Se => {
            let enc = encoder::encode(model, Side::Product, tokens).ok()?;
            Some(Profile::Mean(encoder::mean_rows(&enc)))
        }
    }
}

fn term_score(model: &EmbeddingModel, token_id: u32, profile: &Profile) -> f64 {
    let q = model.row(Side::Query, token_id);
    match profile {
        Profile::Rows(flat) => {
            let dim = model.dim();
            let mut best = f64::NEG_INFINITY;
            for row in flat.chunks_exact(dim) {
                let d = dot(q, row);
                if d > best {
                    best = d;
                }
            }
            best
        }
        Profile::Mean(mean) => dot(q, mean),
    }
}

impl TermIndex {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn postings(&self) -> &BTreeMap<u32, Vec<PostingEntry>> {
        &self.postings
    }

    pub fn posting(&self, token_id: u32) -> Option<&[PostingEntry]> {
        self.postings.get(&token_id).map(Vec::as_slice)
    }

    pub fn vocab_fingerprint(&self) -> u64 {
        self.vocab_fingerprint
    }

    pub fn model_fingerprint(&self) -> u64 {
        self.model_fingerprint
    }

    pub fn product_count(&self) -> usize {
        self.product_count
    }

    pub fn posting_count(&self) -> usize {
        self.postings.values().map(Vec::len).sum()
    }

    /// Fails unless the model and vocabulary are the ones this index was
    /// built from.
    pub fn verify(&self, model: &EmbeddingModel, vocab: &Vocabulary) -> Result<()> {
        let vfp = vocab.fingerprint();
        if vfp != self.vocab_fingerprint {
            return Err(Error::VocabFingerprintMismatch {
                expected: self.vocab_fingerprint,
                actual: vfp,
            });
        }
        let mfp = model.fingerprint();
        if mfp != self.model_fingerprint {
            return Err(Error::ModelFingerprintMismatch {
                expected: self.model_fingerprint,
                actual: mfp,
            });
        }
        Ok(())
    }

    /// Reassembles an index from serialized parts, validating the posting
    /// invariants: scores above the threshold, strict (score desc, id asc)
    /// order, no duplicate ids per list.
    pub fn from_parts(
        gamma: f64,
        postings: BTreeMap<u32, Vec<PostingEntry>>,
        vocab_fingerprint: u64,
        model_fingerprint: u64,
        product_count: usize,
    ) -> Result<TermIndex> {
        for (&t, list) in &postings {
            for pair in list.windows(2) {
                let ordered = pair[1].score < pair[0].score
                    || (pair[1].score == pair[0].score && pair[1].product_id > pair[0].product_id);
                if !ordered {
                    return Err(Error::Invariant(alloc::format!(
                        "posting list for token {t} out of order"
                    )));
                }
            }
            if list.iter().any(|e| !(f64::from(e.score) > gamma)) {
                return Err(Error::Invariant(alloc::format!(
                    "posting list for token {t} holds a score at or below the threshold"
                )));
            }
        }
        Ok(TermIndex {
            gamma,
            postings,
            vocab_fingerprint,
            model_fingerprint,
            product_count,
        })
    }
}

/// Build the index over pre-tokenized products for the given query-token
/// vocabulary and threshold.
pub fn build_index(
    model: &EmbeddingModel,
    vocab: &Vocabulary,
    product_tokens: &BTreeMap<u32, TokenSequence>,
    query_vocab: &BTreeSet<u32>,
    gamma: f64,
) -> Result<(TermIndex, IndexWarnings)> {
    model.verify_vocab(vocab)?;
    let mut warnings = IndexWarnings {
        empty_query_vocab: query_vocab.is_empty(),
        ..IndexWarnings::default()
    };
    let mut postings: BTreeMap<u32, Vec<PostingEntry>> =
        query_vocab.iter().map(|&t| (t, Vec::new())).collect();

    for (&pid, tokens) in product_tokens {
        let Some(profile) = product_profile(model, tokens) else {
            warnings.empty_products.push(pid);
            continue;
        };
        for &t in query_vocab {
            let score = term_score(model, t, &profile) as f32;
            if f64::from(score) > gamma {
                postings
                    .get_mut(&t)
                    .expect("directory covers query vocab")
                    .push(PostingEntry {
                        product_id: pid,
                        score,
                    });
            }
        }
    }
    for list in postings.values_mut() {
        list.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.product_id.cmp(&b.product_id))
        });
    }
    let index = TermIndex {
        gamma,
        postings,
        vocab_fingerprint: vocab.fingerprint(),
        model_fingerprint: model.fingerprint(),
        product_count: product_tokens.len(),
    };
    Ok((index, warnings))
}

const CALIBRATE_LABEL: u64 = 0x6361_6c69_62; // "calib"

/// Pick the threshold whose strict gate keeps about `target_fraction` of
/// all (query token, product) scores, estimated on a seeded sample of at
/// most `sample_cap` products. Also returns the sampled score distribution's
/// statistics (its mean and spread locate follow-up thresholds).
pub fn calibrate_gamma(
    model: &EmbeddingModel,
    vocab: &Vocabulary,
    product_tokens: &BTreeMap<u32, TokenSequence>,
    query_vocab: &BTreeSet<u32>,
    target_fraction: f64,
    sample_cap: usize,
    seed: u64,
) -> Result<(f64, ScoreStats)> {
    model.verify_vocab(vocab)?;
    if !(0.0..=1.0).contains(&target_fraction) {
        return Err(Error::Invariant(
            "calibration target must be a fraction".into(),
        ));
    }
    let ids: Vec<u32> = product_tokens.keys().copied().collect();
    let sampled: Vec<u32> = if ids.len() > sample_cap {
        let mut rng = Stream::substream(seed, CALIBRATE_LABEL);
        rng.sample_indices(ids.len(), sample_cap)
            .into_iter()
            .map(|i| ids[i])
            .collect()
    } else {
        ids
    };

    // Scores are quantized exactly as the index stores them, so the strict
    // threshold comparison sees the same values during calibration and build.
    let mut scores: Vec<f64> = Vec::new();
    for pid in sampled {
        let Some(profile) = product_profile(model, &product_tokens[&pid]) else {
            continue;
        };
        for &t in query_vocab {
            scores.push(f64::from(term_score(model, t, &profile) as f32));
        }
    }
    if scores.is_empty() {
        return Err(Error::Invariant(
            "nothing to calibrate on: empty query vocabulary or all products empty".into(),
        ));
    }

    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    let stats = ScoreStats {
        mean,
        std: libm::sqrt(var),
    };

    scores.sort_by(|a, b| b.total_cmp(a));
    let keep = libm::round(target_fraction * n) as usize;
    let gamma = if keep >= scores.len() {
        f64::NEG_INFINITY
    } else {
        scores[keep]
    };
    Ok((gamma, stats))
}

/// Union the query tokens' posting lists and rank by the sum of stored
/// scores, each token occurrence contributing its posting score (missing
/// entries contribute zero).
pub fn retrieve_accumulate(
    index: &TermIndex,
    q_tokens: &TokenSequence,
    cap: Option<usize>,
) -> RetrievalResult {
    let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
    for &t in &q_tokens.ids {
        if let Some(list) = index.posting(t) {
            for e in list {
                *acc.entry(e.product_id).or_insert(0.0) += f64::from(e.score);
            }
        }
    }
    rank(acc.into_iter().collect(), cap)
}

/// Union the query tokens' posting lists, then rescore every candidate with
/// the model's full similarity.
pub fn retrieve_exact(
    index: &TermIndex,
    model: &EmbeddingModel,
    q_tokens: &TokenSequence,
    product_tokens: &BTreeMap<u32, TokenSequence>,
    cap: Option<usize>,
) -> Result<RetrievalResult> {
    let mut candidates: BTreeSet<u32> = BTreeSet::new();
    for &t in &q_tokens.ids {
        if let Some(list) = index.posting(t) {
            candidates.extend(list.iter().map(|e| e.product_id));
        }
    }
    let mut scored = Vec::with_capacity(candidates.len());
    for pid in candidates {
        let tokens = product_tokens.get(&pid).ok_or(Error::UnknownProduct(pid))?;
        scored.push((pid, encoder::score(model, q_tokens, tokens)?));
    }
    Ok(rank(scored, cap))
}

fn rank(mut scored: Vec<(u32, f64)>, cap: Option<usize>) -> RetrievalResult {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    if let Some(cap) = cap {
        scored.truncate(cap);
    }
    RetrievalResult { ranked: scored }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Product, Query};
    use crate::encoder::TableSlot;
    use alloc::string::{String, ToString};
    use alloc::vec;

    fn make_corpus(product_titles: &[&str], query_texts: &[&str]) -> Corpus {
        let products = product_titles
            .iter()
            .enumerate()
            .map(|(i, t)| Product {
                product_id: i as u32,
                title: t.to_string(),
                description: None,
                extra_fields: BTreeMap::new(),
            })
            .collect();
        let queries = query_texts
            .iter()
            .enumerate()
            .map(|(i, t)| Query {
                query_id: i as u32,
                text: t.to_string(),
            })
            .collect();
        Corpus::new(products, queries, Vec::new()).unwrap().0
    }

    fn word_vocab(corpus: &Corpus) -> Vocabulary {
        let texts: Vec<String> = corpus
            .products()
            .values()
            .map(|p| p.title.clone())
            .chain(corpus.queries().values().map(|q| q.text.clone()))
            .collect();
        crate::tokenizer::train_word(&texts, 64, &BTreeSet::new()).unwrap()
    }

    #[test]
    fn query_vocab_is_the_union_of_query_tokens() {
        let corpus = make_corpus(&["x"], &["red chair", "blue chair"]);
        let vocab = word_vocab(&corpus);
        let got = collect_query_vocab(&corpus, &vocab);
        let want: BTreeSet<u32> = ["red", "blue", "chair"]
            .iter()
            .map(|w| vocab.id(w).unwrap())
            .collect();
        assert_eq!(got, want);
        let empty = make_corpus(&["x"], &[]);
        assert!(collect_query_vocab(&empty, &vocab).is_empty());
    }

    #[test]
    fn hand_set_embeddings_give_hand_computed_postings() {
        let corpus = make_corpus(&["aa bb", "bb cc", "cc"], &["aa", "cc"]);
        let vocab = word_vocab(&corpus);
        let id = |w: &str| vocab.id(w).unwrap();
        let mut model = EmbeddingModel::init(ModelVariant::H1, 2, &vocab, 1);
        model.row_mut(TableSlot::Query, id("aa")).copy_from_slice(&[1.0, 0.0]);
        model.row_mut(TableSlot::Query, id("cc")).copy_from_slice(&[0.0, 1.0]);
        model.row_mut(TableSlot::Product, id("aa")).copy_from_slice(&[0.9, 0.1]);
        model.row_mut(TableSlot::Product, id("bb")).copy_from_slice(&[0.4, 0.2]);
        model.row_mut(TableSlot::Product, id("cc")).copy_from_slice(&[-0.3, 0.8]);
        let products = tokenize_products(&corpus, &vocab, ProductTextMode::TitleOnly);
        let qv = collect_query_vocab(&corpus, &vocab);
        let (index, warnings) = build_index(&model, &vocab, &products, &qv, 0.25).unwrap();
        assert_eq!(warnings, IndexWarnings::default());
        // term "aa": product 0 max(0.9, 0.4) = 0.9; product 1 max(0.4, -0.3)
        // = 0.4; product 2 = -0.3 (gated out)
        let aa = index.posting(id("aa")).unwrap();
        assert_eq!(aa.len(), 2);
        assert_eq!((aa[0].product_id, aa[0].score), (0, 0.9));
        assert_eq!((aa[1].product_id, aa[1].score), (1, 0.4));
        // term "cc": product 0 max(0.1, 0.2) = 0.2 (gated); 1 -> 0.8; 2 -> 0.8
        let cc = index.posting(id("cc")).unwrap();
        assert_eq!(cc.len(), 2);
        assert_eq!((cc[0].product_id, cc[0].score), (1, 0.8));
        assert_eq!((cc[1].product_id, cc[1].score), (2, 0.8));
    }

    #[test]
    fn infinite_thresholds_are_degenerate() {
        let corpus = make_corpus(&["aa bb", "bb cc", "cc aa"], &["aa cc"]);
        let vocab = word_vocab(&corpus);
        let model = EmbeddingModel::init(ModelVariant::H1, 4, &vocab, 2);
        let products = tokenize_products(&corpus, &vocab, ProductTextMode::TitleOnly);
        let qv = collect_query_vocab(&corpus, &vocab);
        let (top, _) = build_index(&model, &vocab, &products, &qv, f64::INFINITY).unwrap();
        assert!(top.postings().values().all(Vec::is_empty));
        let (bot, _) = build_index(&model, &vocab, &products, &qv, f64::NEG_INFINITY).unwrap();
        assert!(bot.postings().values().all(|l| l.len() == 3));
    }

    #[test]
    fn single_token_query_returns_its_posting_list() {
        let corpus = make_corpus(&["aa", "aa aa", "bb"], &["aa"]);
        let vocab = word_vocab(&corpus);
        let model = EmbeddingModel::init(ModelVariant::H1, 4, &vocab, 3);
        let products = tokenize_products(&corpus, &vocab, ProductTextMode::TitleOnly);
        let qv = collect_query_vocab(&corpus, &vocab);
        let (index, _) = build_index(&model, &vocab, &products, &qv, f64::NEG_INFINITY).unwrap();
        let q = tokenize(&vocab, "aa");
        let got = retrieve_accumulate(&index, &q, None);
        let want: Vec<(u32, f64)> = index
            .posting(vocab.id("aa").unwrap())
            .unwrap()
            .iter()
            .map(|e| (e.product_id, f64::from(e.score)))
            .collect();
        // same set; both orders follow (score desc, id asc)
        assert_eq!(got.ranked, want);
        let exact = retrieve_exact(&index, &model, &q, &products, None).unwrap();
        assert_eq!(exact.ids().len(), 3);
    }

    #[test]
    fn unknown_tokens_union_to_nothing() {
        let corpus = make_corpus(&["aa"], &["aa"]);
        let vocab = word_vocab(&corpus);
        let model = EmbeddingModel::init(ModelVariant::De, 4, &vocab, 4);
        let products = tokenize_products(&corpus, &vocab, ProductTextMode::TitleOnly);
        let qv = collect_query_vocab(&corpus, &vocab);
        let (index, _) = build_index(&model, &vocab, &products, &qv, f64::NEG_INFINITY).unwrap();
        // "zz" tokenizes to UNK, which is not in the query vocabulary
        let q = tokenize(&vocab, "zz");
        assert!(retrieve_accumulate(&index, &q, None).ranked.is_empty());
    }

    #[test]
    fn duplicate_query_tokens_accumulate_per_occurrence() {
        let corpus = make_corpus(&["aa", "bb"], &["aa"]);
        let vocab = word_vocab(&corpus);
        let model = EmbeddingModel::init(ModelVariant::H1, 4, &vocab, 5);
        let products = tokenize_products(&corpus, &vocab, ProductTextMode::TitleOnly);
        let qv = collect_query_vocab(&corpus, &vocab);
        let (index, _) = build_index(&model, &vocab, &products, &qv, f64::NEG_INFINITY).unwrap();
        let once = retrieve_accumulate(&index, &tokenize(&vocab, "aa"), None);
        let twice = retrieve_accumulate(&index, &tokenize(&vocab, "aa aa"), None);
        for ((p1, s1), (p2, s2)) in once.ranked.iter().zip(&twice.ranked) {
            assert_eq!(p1, p2);
            assert!((s2 - 2.0 * s1).abs() < 1e-12);
        }
    }

    #[test]
    fn accumulate_at_open_threshold_matches_brute_force() {
        let corpus = make_corpus(
            &["aa bb cc", "bb cc dd", "dd ee", "aa ee ff", "cc", "ff aa"],
            &["aa cc", "dd", "ee ff aa"],
        );
        let vocab = word_vocab(&corpus);
        let products = tokenize_products(&corpus, &vocab, ProductTextMode::TitleOnly);
        for variant in [ModelVariant::H1, ModelVariant::De, ModelVariant::Se] {
            let model = EmbeddingModel::init(variant, 8, &vocab, 6);
            let qv = collect_query_vocab(&corpus, &vocab);
            let (index, _) = build_index(&model, &vocab, &products, &qv, f64::NEG_INFINITY).unwrap();
            for query in corpus.queries().values() {
                let q = tokenize(&vocab, &query.text);
                let got = retrieve_accumulate(&index, &q, None);

                // Oracle: per-token scores in full precision, quantized the
                // way the index stores them, summed in token order.
                let mut expected: Vec<(u32, f64)> = Vec::new();
                for (&pid, ptoks) in &products {
                    let profile = product_profile(&model, ptoks).unwrap();
                    let mut sum = 0.0f64;
                    for &t in &q.ids {
                        sum += f64::from(term_score(&model, t, &profile) as f32);
                    }
                    expected.push((pid, sum));
                }
                expected.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                assert_eq!(got.ranked, expected, "{variant:?} query {}", query.query_id);

                // And against the unquantized full similarity. For pooled
                // variants the per-token sum is query-length times the
                // pooled score: an identical ranking at a per-query scale.
                let scale = match variant {
                    ModelVariant::H1 => 1.0,
                    ModelVariant::De | ModelVariant::Se => q.len() as f64,
                };
                for &(pid, s) in &got.ranked {
                    let full = encoder::score(&model, &q, &products[&pid]).unwrap();
                    assert!((s - scale * full).abs() <= 1e-6, "{variant:?}: {s} vs {full}");
                }
            }
        }
    }

    #[test]
    fn threshold_nesting_and_exact_mode_consistency() {
        let corpus = make_corpus(
            &["aa bb", "bb cc", "cc dd", "dd aa", "aa cc"],
            &["aa", "bb cc", "dd"],
        );
        let vocab = word_vocab(&corpus);
        let model = EmbeddingModel::init(ModelVariant::H1, 4, &vocab, 7);
        let products = tokenize_products(&corpus, &vocab, ProductTextMode::TitleOnly);
        let qv = collect_query_vocab(&corpus, &vocab);
        let (gamma, stats) =
            calibrate_gamma(&model, &vocab, &products, &qv, 0.3, 100, 9).unwrap();
        assert!(stats.std >= 0.0);
        let gammas = [f64::NEG_INFINITY, gamma, gamma + stats.std];
        let indexes: Vec<TermIndex> = gammas
            .iter()
            .map(|&g| build_index(&model, &vocab, &products, &qv, g).unwrap().0)
            .collect();
        for pair in indexes.windows(2) {
            for (&t, wide) in pair[0].postings() {
                let narrow = pair[1].posting(t).unwrap();
                let wide_ids: BTreeSet<u32> = wide.iter().map(|e| e.product_id).collect();
                assert!(narrow.iter().all(|e| wide_ids.contains(&e.product_id)));
                assert!(narrow.len() <= wide.len());
            }
        }
        // exact-mode scores equal direct recomputation bit for bit
        let q = tokenize(&vocab, "bb cc");
        let exact = retrieve_exact(&indexes[1], &model, &q, &products, None).unwrap();
        for &(pid, s) in &exact.ranked {
            assert_eq!(s, encoder::score(&model, &q, &products[&pid]).unwrap());
        }
    }

    #[test]
    fn calibration_tracks_the_target_fraction() {
        let corpus = make_corpus(
            &["aa bb", "bb cc", "cc dd", "dd ee", "ee ff", "ff aa", "aa cc", "bb dd"],
            &["aa bb cc dd ee ff"],
        );
        let vocab = word_vocab(&corpus);
        let model = EmbeddingModel::init(ModelVariant::De, 8, &vocab, 8);
        let products = tokenize_products(&corpus, &vocab, ProductTextMode::TitleOnly);
        let qv = collect_query_vocab(&corpus, &vocab);
        let total = (products.len() * qv.len()) as f64;
        for target in [0.1, 0.25, 0.5] {
            let (gamma, _) =
                calibrate_gamma(&model, &vocab, &products, &qv, target, usize::MAX, 1).unwrap();
            let (index, _) = build_index(&model, &vocab, &products, &qv, gamma).unwrap();
            let frac = index.posting_count() as f64 / total;
            assert!((frac - target).abs() <= 1.0 / total + 1e-9, "target {target}, got {frac}");
        }
        // degenerate targets
        let (g1, _) = calibrate_gamma(&model, &vocab, &products, &qv, 1.0, usize::MAX, 1).unwrap();
        assert_eq!(g1, f64::NEG_INFINITY);
        let (g0, _) = calibrate_gamma(&model, &vocab, &products, &qv, 0.0, usize::MAX, 1).unwrap();
        let (empty, _) = build_index(&model, &vocab, &products, &qv, g0).unwrap();
        assert_eq!(empty.posting_count(), 0);
    }

    #[test]
    fn empty_products_are_skipped_with_a_warning() {
        let corpus = make_corpus(&["aa", "bb"], &["aa"]);
        let vocab = word_vocab(&corpus);
        let model = EmbeddingModel::init(ModelVariant::H1, 4, &vocab, 9);
        let mut products = tokenize_products(&corpus, &vocab, ProductTextMode::TitleOnly);
        products.insert(7, TokenSequence::default());
        let qv = collect_query_vocab(&corpus, &vocab);
        let (index, warnings) = build_index(&model, &vocab, &products, &qv, f64::NEG_INFINITY).unwrap();
        assert_eq!(warnings.empty_products, vec![7]);
        assert_eq!(index.product_count(), 3);
        assert!(index
            .postings()
            .values()
            .all(|l| l.iter().all(|e| e.product_id != 7)));
    }

    #[test]
    fn from_parts_rejects_malformed_lists() {
        let entry = |p: u32, s: f32| PostingEntry { product_id: p, score: s };
        let mut bad_order = BTreeMap::new();
        bad_order.insert(0u32, vec![entry(0, 1.0), entry(1, 2.0)]);
        assert!(TermIndex::from_parts(0.0, bad_order, 1, 2, 2).is_err());
        let mut dup = BTreeMap::new();
        dup.insert(0u32, vec![entry(0, 1.0), entry(0, 1.0)]);
        assert!(TermIndex::from_parts(0.0, dup, 1, 2, 2).is_err());
        let mut below = BTreeMap::new();
        below.insert(0u32, vec![entry(0, 0.5)]);
        assert!(TermIndex::from_parts(1.0, below, 1, 2, 2).is_err());
        let mut fine = BTreeMap::new();
        fine.insert(0u32, vec![entry(0, 2.0), entry(1, 1.5)]);
        assert!(TermIndex::from_parts(1.0, fine, 1, 2, 2).is_ok());
    }
}
