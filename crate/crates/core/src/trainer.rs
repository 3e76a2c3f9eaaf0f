//! Margin-loss training with in-batch random negatives.
//!
//! The loss for a (query, positive, negative) triplet is
//! max(0, margin - s(q, p+) + s(q, p-)) with s the model variant's score.
//! The subgradient is exact: zero on the flat region, and through the
//! argmax product token of each query token for the max-sim variant (ties
//! broken toward the lowest token index, making training deterministic).

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::corpus::{Corpus, ProductTextMode, TrainingPair};
use crate::encoder::{
    self, dot, mean_rows, EmbeddingModel, EncodedText, ModelVariant, Side, TableSlot,
};
use crate::metrics::EquivalenceMap;
use crate::rng::Stream;
use crate::tokenizer::{tokenize, TokenSequence, Vocabulary};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub fn default_adam() -> Optimizer {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub margin: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            margin: 1.0,
            learning_rate: 1e-3,
            batch_size: 256,
            epochs: 10,
            seed: 0,
            optimizer: Optimizer::default_adam(),
        }
    }
}

/// Wall-clock source; training time is reported, never used for logic. The
/// no-op [`NullClock`] keeps the core crate free of system dependencies.
pub trait Clock {
    fn now_seconds(&self) -> f64;
}

pub struct NullClock;

impl Clock for NullClock {
    fn now_seconds(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub mean_loss: f64,
    pub zero_loss_fraction: f64,
    pub seconds: f64,
    /// Triplets whose negative draw was abandoned (every attempt was
    /// title-equivalent to the positive).
    pub skipped_triplets: usize,
    pub triplets: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainStats {
    pub epochs: Vec<EpochStats>,
}

/// Sparse gradient over embedding rows, keyed by physical table slot and
/// token id. Contributions to the same row accumulate.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGrad {
    rows: BTreeMap<(TableSlot, u32), Vec<f64>>,
    dim: usize,
}

impl SparseGrad {
    pub fn new(dim: usize) -> SparseGrad {
        SparseGrad {
            rows: BTreeMap::new(),
            dim,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, slot: TableSlot, token_id: u32) -> Option<&[f64]> {
        self.rows.get(&(slot, token_id)).map(Vec::as_slice)
    }

    pub fn entries(&self) -> impl Iterator<Item = (TableSlot, u32, &[f64])> {
        self.rows.iter().map(|(&(s, t), g)| (s, t, g.as_slice()))
    }

    fn row_mut(&mut self, slot: TableSlot, token_id: u32) -> &mut [f64] {
        self.rows
            .entry((slot, token_id))
            .or_insert_with(|| alloc::vec![0.0; self.dim])
    }

    fn add_scaled(&mut self, slot: TableSlot, token_id: u32, scale: f64, v: &[f64]) {
        for (g, x) in self.row_mut(slot, token_id).iter_mut().zip(v) {
            *g += scale * x;
        }
    }

    fn add_diff(&mut self, slot: TableSlot, token_id: u32, plus: &[f64], minus: &[f64]) {
        for ((g, a), b) in self.row_mut(slot, token_id).iter_mut().zip(plus).zip(minus) {
            *g += a - b;
        }
    }

    fn merge(&mut self, other: SparseGrad) {
        for ((slot, tok), g) in other.rows {
            self.add_scaled(slot, tok, 1.0, &g);
        }
    }
}

/// Max-sim with the argmax product-token index per query token, first
/// (lowest) index winning ties.
fn maxsim_with_argmax(q: &EncodedText, p: &EncodedText) -> (f64, Vec<usize>) {
    let mut total = 0.0;
    let mut argmax = Vec::with_capacity(q.len());
    for i in 0..q.len() {
        let qi = q.row(i);
        let mut best = f64::NEG_INFINITY;
        let mut best_j = 0;
        for j in 0..p.len() {
            let d = dot(qi, p.row(j));
            if d > best {
                best = d;
                best_j = j;
            }
        }
        total += best;
        argmax.push(best_j);
    }
    (total, argmax)
}

fn loss_and_gradient(
    model: &EmbeddingModel,
    q_tokens: &TokenSequence,
    p_pos_tokens: &TokenSequence,
    p_neg_tokens: &TokenSequence,
    margin: f64,
) -> Result<(f64, SparseGrad)> {
    let q = encoder::encode(model, Side::Query, q_tokens)?;
    let pp = encoder::encode(model, Side::Product, p_pos_tokens)?;
    let pn = encoder::encode(model, Side::Product, p_neg_tokens)?;
    if q.is_empty() || pp.is_empty() || pn.is_empty() {
        return Err(Error::EmptyEncoding);
    }

    let q_slot = model.slot_of(Side::Query);
    let p_slot = model.slot_of(Side::Product);
    let mut grad = SparseGrad::new(model.dim());

    match model.variant() {
        ModelVariant::H1 => {
            let (s_pos, arg_pos) = maxsim_with_argmax(&q, &pp);
            let (s_neg, arg_neg) = maxsim_with_argmax(&q, &pn);
            let loss = margin - s_pos + s_neg;
            if loss <= 0.0 {
                return Ok((0.0, grad));
            }
            for i in 0..q.len() {
                grad.add_diff(q_slot, q.token_ids[i], pn.row(arg_neg[i]), pp.row(arg_pos[i]));
                grad.add_scaled(p_slot, pp.token_ids[arg_pos[i]], -1.0, q.row(i));
                grad.add_scaled(p_slot, pn.token_ids[arg_neg[i]], 1.0, q.row(i));
            }
            Ok((loss, grad))
        }
        ModelVariant::De | ModelVariant::Se => {
            let mq = mean_rows(&q);
            let mpp = mean_rows(&pp);
            let mpn = mean_rows(&pn);
            let loss = margin - dot(&mq, &mpp) + dot(&mq, &mpn);
            if loss <= 0.0 {
                return Ok((0.0, grad));
            }
            let m = q.len() as f64;
            for &t in &q.token_ids {
                for ((g, a), b) in grad.row_mut(q_slot, t).iter_mut().zip(&mpn).zip(&mpp) {
                    *g += (a - b) / m;
                }
            }
            for &t in &pp.token_ids {
                grad.add_scaled(p_slot, t, -1.0 / pp.len() as f64, &mq);
            }
            for &t in &pn.token_ids {
                grad.add_scaled(p_slot, t, 1.0 / pn.len() as f64, &mq);
            }
            Ok((loss, grad))
        }
    }
}

/// Hinge loss of one triplet under the model's scoring variant.
pub fn triplet_loss(
    model: &EmbeddingModel,
    q_tokens: &TokenSequence,
    p_pos_tokens: &TokenSequence,
    p_neg_tokens: &TokenSequence,
    margin: f64,
) -> Result<f64> {
    let s_pos = encoder::score(model, q_tokens, p_pos_tokens)?;
    let s_neg = encoder::score(model, q_tokens, p_neg_tokens)?;
    let loss = margin - s_pos + s_neg;
    Ok(if loss > 0.0 { loss } else { 0.0 })
}

/// Exact subgradient of [`triplet_loss`] over the touched embedding rows;
/// empty when the loss is zero.
pub fn loss_gradient(
    model: &EmbeddingModel,
    q_tokens: &TokenSequence,
    p_pos_tokens: &TokenSequence,
    p_neg_tokens: &TokenSequence,
    margin: f64,
) -> Result<SparseGrad> {
    loss_and_gradient(model, q_tokens, p_pos_tokens, p_neg_tokens, margin).map(|(_, g)| g)
}

/// Adam first/second moment buffers, one pair per physical table slot.
struct AdamState {
    m: BTreeMap<TableSlot, Vec<f64>>,
    v: BTreeMap<TableSlot, Vec<f64>>,
    step: u64,
}

impl AdamState {
    fn new(model: &EmbeddingModel) -> AdamState {
        let zeros = |slot: &TableSlot| (*slot, alloc::vec![0.0; model.table(*slot).len()]);
        AdamState {
            m: model.slots().iter().map(zeros).collect(),
            v: model.slots().iter().map(zeros).collect(),
            step: 0,
        }
    }
}

fn apply_step(
    model: &mut EmbeddingModel,
    adam: &mut Option<AdamState>,
    config: &TrainConfig,
    grad: &SparseGrad,
) {
    let dim = model.dim();
    match (config.optimizer, adam) {
        (Optimizer::Sgd, _) => {
            for (slot, tok, g) in grad.entries() {
                for (w, gd) in model.row_mut(slot, tok).iter_mut().zip(g) {
                    *w -= config.learning_rate * gd;
                }
            }
        }
        (Optimizer::Adam { beta1, beta2, epsilon }, Some(state)) => {
            state.step += 1;
            for slot in model.slots() {
                for x in state.m.get_mut(slot).expect("slot buffers") {
                    *x *= beta1;
                }
                for x in state.v.get_mut(slot).expect("slot buffers") {
                    *x *= beta2;
                }
            }
            for (slot, tok, g) in grad.entries() {
                let base = tok as usize * dim;
                let m = state.m.get_mut(&slot).expect("slot buffers");
                let v = state.v.get_mut(&slot).expect("slot buffers");
                for (d, gd) in g.iter().enumerate() {
                    m[base + d] += (1.0 - beta1) * gd;
                    v[base + d] += (1.0 - beta2) * gd * gd;
                }
            }
            let bc1 = 1.0 - libm::pow(beta1, state.step as f64);
            let bc2 = 1.0 - libm::pow(beta2, state.step as f64);
            for slot in model.slots() {
                let m = &state.m[slot];
                let v = &state.v[slot];
                let table = model.table_mut(*slot);
                for i in 0..table.len() {
                    let m_hat = m[i] / bc1;
                    let v_hat = v[i] / bc2;
                    table[i] -= config.learning_rate * m_hat / (libm::sqrt(v_hat) + epsilon);
                }
            }
        }
        (Optimizer::Adam { .. }, None) => unreachable!("state allocated for Adam"),
    }
}

const TRAIN_LABEL: u64 = 0x7472_6169_6e00; // "train"

/// Train the model in place over the balanced pairs.
///
/// Each epoch shuffles the pairs (seeded), then walks fixed-size batches.
/// Every positive pair draws one negative product uniformly from the other
/// pairs in its batch, redrawing while the draw is title-equivalent to the
/// positive (up to batch_size attempts, then the triplet is skipped).
/// Negative-target pairs never act as positives; they only enlarge the
/// batch's negative pool. The optimizer consumes the summed batch
/// subgradient.
pub fn train(
    model: &mut EmbeddingModel,
    pairs: &[TrainingPair],
    corpus: &Corpus,
    vocab: &Vocabulary,
    text_mode: ProductTextMode,
    config: &TrainConfig,
    clock: &dyn Clock,
) -> Result<TrainStats> {
    model.verify_vocab(vocab)?;
    if pairs.is_empty() {
        return Err(Error::NoTrainingPairs);
    }
    if config.batch_size < 2 {
        return Err(Error::BatchTooSmall(config.batch_size));
    }
    if !(config.margin > 0.0 && config.learning_rate > 0.0) {
        return Err(Error::Invariant(
            "margin and learning rate must be positive".into(),
        ));
    }

    let mut query_tokens: BTreeMap<u32, TokenSequence> = BTreeMap::new();
    let mut product_tokens: BTreeMap<u32, TokenSequence> = BTreeMap::new();
    for pair in pairs {
        if !query_tokens.contains_key(&pair.query_id) {
            let q = corpus
                .query(pair.query_id)
                .ok_or(Error::UnknownQuery(pair.query_id))?;
            query_tokens.insert(pair.query_id, tokenize(vocab, &q.text));
        }
        if !product_tokens.contains_key(&pair.product_id) {
            let text = corpus.product_text(pair.product_id, text_mode)?;
            product_tokens.insert(pair.product_id, tokenize(vocab, &text));
        }
    }

    let eq = EquivalenceMap::from_corpus(corpus);
    let mut rng = Stream::substream(config.seed, TRAIN_LABEL);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut adam = match config.optimizer {
        Optimizer::Adam { .. } => Some(AdamState::new(model)),
        Optimizer::Sgd => None,
    };

    let mut stats = TrainStats::default();
    for _ in 0..config.epochs {
        let started = clock.now_seconds();
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut triplets = 0usize;
        let mut zeros = 0usize;
        let mut skipped = 0usize;

        for batch in order.chunks(config.batch_size) {
            if batch.len() < 2 {
                continue;
            }
            let mut batch_grad = SparseGrad::new(model.dim());
            let mut batch_triplets = 0usize;
            for (slot_in_batch, &pi) in batch.iter().enumerate() {
                let pair = &pairs[pi];
                if pair.target != 1 {
                    continue;
                }
                let pos_class = eq.class_of(pair.product_id)?;
                let mut negative = None;
                for _ in 0..config.batch_size {
                    let r = rng.index(batch.len() - 1);
                    let other = if r >= slot_in_batch { r + 1 } else { r };
                    let candidate = pairs[batch[other]].product_id;
                    if eq.class_of(candidate)? != pos_class {
                        negative = Some(candidate);
                        break;
                    }
                }
                let Some(neg_id) = negative else {
                    skipped += 1;
                    continue;
                };

                let q = &query_tokens[&pair.query_id];
                let pp = &product_tokens[&pair.product_id];
                let pn = &product_tokens[&neg_id];
                let (loss, grad) = loss_and_gradient(model, q, pp, pn, config.margin)?;
                loss_sum += loss;
                triplets += 1;
                batch_triplets += 1;
                if loss == 0.0 {
                    zeros += 1;
                } else {
                    batch_grad.merge(grad);
                }
            }
            if batch_triplets > 0 {
                apply_step(model, &mut adam, config, &batch_grad);
            }
        }

        let denom = triplets.max(1) as f64;
        stats.epochs.push(EpochStats {
            mean_loss: loss_sum / denom,
            zero_loss_fraction: zeros as f64 / denom,
            seconds: clock.now_seconds() - started,
            skipped_triplets: skipped,
            triplets,
        });
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Grade, Product, Query, RelevanceLabel};
    use alloc::collections::BTreeSet;
    use alloc::string::{String, ToString};
    use alloc::vec;

    fn word_vocab(texts: &[&str]) -> Vocabulary {
        let owned: Vec<String> = texts.iter().map(|t| t.to_string()).collect();
        crate::tokenizer::train_word(&owned, 64, &BTreeSet::new()).unwrap()
    }

    fn toks(vocab: &Vocabulary, text: &str) -> TokenSequence {
        tokenize(vocab, text)
    }

    #[test]
    fn loss_clamps_at_zero_when_margin_satisfied() {
        let vocab = word_vocab(&["q p n"]);
        let (q, p, n) = (vocab.id("q").unwrap(), vocab.id("p").unwrap(), vocab.id("n").unwrap());
        let mut model = EmbeddingModel::init(ModelVariant::H1, 2, &vocab, 1);
        model.row_mut(TableSlot::Query, q).copy_from_slice(&[1.0, 0.0]);
        model.row_mut(TableSlot::Product, p).copy_from_slice(&[5.0, 0.0]);
        model.row_mut(TableSlot::Product, n).copy_from_slice(&[1.0, 0.0]);
        let loss = triplet_loss(&model, &toks(&vocab, "q"), &toks(&vocab, "p"), &toks(&vocab, "n"), 1.0).unwrap();
        assert_eq!(loss, 0.0);
        let grad = loss_gradient(&model, &toks(&vocab, "q"), &toks(&vocab, "p"), &toks(&vocab, "n"), 1.0).unwrap();
        assert!(grad.is_empty());
    }

    #[test]
    fn equal_scores_leave_exactly_the_margin() {
        let vocab = word_vocab(&["q p n"]);
        let ids: Vec<u32> = ["q", "p", "n"].iter().map(|s| vocab.id(s).unwrap()).collect();
        let mut model = EmbeddingModel::init(ModelVariant::H1, 2, &vocab, 1);
        model.row_mut(TableSlot::Query, ids[0]).copy_from_slice(&[1.0, 1.0]);
        model.row_mut(TableSlot::Product, ids[1]).copy_from_slice(&[0.5, 0.25]);
        model.row_mut(TableSlot::Product, ids[2]).copy_from_slice(&[0.5, 0.25]);
        let loss = triplet_loss(&model, &toks(&vocab, "q"), &toks(&vocab, "p"), &toks(&vocab, "n"), 1.0).unwrap();
        assert_eq!(loss, 1.0);
    }

    #[test]
    fn two_token_h1_loss_matches_hand_arithmetic() {
        let vocab = word_vocab(&["a b c d"]);
        let id = |s: &str| vocab.id(s).unwrap();
        let mut model = EmbeddingModel::init(ModelVariant::H1, 2, &vocab, 3);
        model.row_mut(TableSlot::Query, id("a")).copy_from_slice(&[1.0, 0.0]);
        model.row_mut(TableSlot::Query, id("b")).copy_from_slice(&[0.0, 1.0]);
        model.row_mut(TableSlot::Product, id("c")).copy_from_slice(&[0.5, 0.5]);
        model.row_mut(TableSlot::Product, id("d")).copy_from_slice(&[-0.5, 1.5]);
        // s+ over product "c d": token a -> max(0.5, -0.5) = 0.5;
        // token b -> max(0.5, 1.5) = 1.5; total 2.0
        // s- over product "c": 0.5 + 0.5 = 1.0
        // loss = 1 - 2 + 1 = 0; with margin 1.5, loss = 0.5
        let q = toks(&vocab, "a b");
        let loss0 = triplet_loss(&model, &q, &toks(&vocab, "c d"), &toks(&vocab, "c"), 1.0).unwrap();
        assert_eq!(loss0, 0.0);
        let loss = triplet_loss(&model, &q, &toks(&vocab, "c d"), &toks(&vocab, "c"), 1.5).unwrap();
        assert!((loss - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_token_h1_gradient_is_neg_minus_pos() {
        let vocab = word_vocab(&["q p n"]);
        let id = |s: &str| vocab.id(s).unwrap();
        let mut model = EmbeddingModel::init(ModelVariant::H1, 2, &vocab, 5);
        model.row_mut(TableSlot::Query, id("q")).copy_from_slice(&[0.2, -0.1]);
        model.row_mut(TableSlot::Product, id("p")).copy_from_slice(&[0.3, 0.4]);
        model.row_mut(TableSlot::Product, id("n")).copy_from_slice(&[0.9, -0.2]);
        let grad = loss_gradient(&model, &toks(&vocab, "q"), &toks(&vocab, "p"), &toks(&vocab, "n"), 1.0).unwrap();
        let gq = grad.get(TableSlot::Query, id("q")).unwrap();
        assert!((gq[0] - (0.9 - 0.3)).abs() < 1e-12);
        assert!((gq[1] - (-0.2 - 0.4)).abs() < 1e-12);
        let gp = grad.get(TableSlot::Product, id("p")).unwrap();
        assert_eq!(gp, &[-0.2, 0.1]);
        let gn = grad.get(TableSlot::Product, id("n")).unwrap();
        assert_eq!(gn, &[0.2, -0.1]);
    }

    /// Central finite differences over every touched parameter.
    fn check_gradient(model: &EmbeddingModel, vocab: &Vocabulary, q: &str, pp: &str, pn: &str) -> f64 {
        let margin = 1.0;
        let (q, pp, pn) = (toks(vocab, q), toks(vocab, pp), toks(vocab, pn));
        let loss = triplet_loss(model, &q, &pp, &pn, margin).unwrap();
        if loss <= 1e-3 {
            return 0.0;
        }
        let grad = loss_gradient(model, &q, &pp, &pn, margin).unwrap();
        let h = 1e-5;
        let mut max_rel = 0.0f64;
        let entries: Vec<(TableSlot, u32, Vec<f64>)> = grad
            .entries()
            .map(|(s, t, g)| (s, t, g.to_vec()))
            .collect();
        for (slot, tok, g) in entries {
            for d in 0..g.len() {
                let mut probe = model.clone();
                probe.row_mut(slot, tok)[d] += h;
                let up = triplet_loss(&probe, &q, &pp, &pn, margin).unwrap();
                probe.row_mut(slot, tok)[d] -= 2.0 * h;
                let down = triplet_loss(&probe, &q, &pp, &pn, margin).unwrap();
                let fd = (up - down) / (2.0 * h);
                let denom = fd.abs().max(g[d].abs()).max(1e-8);
                max_rel = max_rel.max((fd - g[d]).abs() / denom);
            }
        }
        max_rel
    }

    #[test]
    fn finite_differences_agree_for_all_variants() {
        let vocab = word_vocab(&["red oak chair small table lamp blue rug soft wide"]);
        for variant in [ModelVariant::H1, ModelVariant::De, ModelVariant::Se] {
            let mut worst = 0.0f64;
            let mut checked = 0;
            for seed in 0..40u64 {
                let model = EmbeddingModel::init(variant, 4, &vocab, seed);
                let rel = check_gradient(&model, &vocab, "red chair lamp", "oak small table", "blue rug soft wide");
                if rel > 0.0 {
                    checked += 1;
                    worst = worst.max(rel);
                }
            }
            assert!(checked >= 10, "too few active-loss samples for {variant:?}");
            assert!(worst <= 1e-4, "{variant:?} worst rel err {worst}");
        }
    }

    fn tiny_corpus() -> (Corpus, Vec<TrainingPair>, Vocabulary) {
        let products = vec![
            ("red chair", 0u32),
            ("blue table", 1),
            ("green lamp", 2),
            ("soft rug", 3),
            ("oak desk", 4),
            ("tin shelf", 5),
        ]
        .into_iter()
        .map(|(t, i)| Product {
            product_id: i,
            title: t.to_string(),
            description: None,
            extra_fields: BTreeMap::new(),
        })
        .collect::<Vec<_>>();
        let queries = vec![
            Query { query_id: 0, text: "red chair".to_string() },
            Query { query_id: 1, text: "blue table".to_string() },
            Query { query_id: 2, text: "green lamp".to_string() },
        ];
        let labels: Vec<RelevanceLabel> = vec![
            (0, 0, Grade::Exact),
            (0, 3, Grade::Irrelevant),
            (1, 1, Grade::Exact),
            (1, 4, Grade::Irrelevant),
            (2, 2, Grade::Exact),
            (2, 5, Grade::Irrelevant),
        ]
        .into_iter()
        .map(|(q, p, g)| RelevanceLabel { query_id: q, product_id: p, grade: g })
        .collect();
        let (corpus, _) = Corpus::new(products, queries, labels).unwrap();
        let pairs = crate::corpus::build_training_pairs(corpus.labels(), 11).unwrap();
        let texts: Vec<String> = corpus
            .products()
            .values()
            .map(|p| p.title.clone())
            .chain(corpus.queries().values().map(|q| q.text.clone()))
            .collect();
        let vocab = crate::tokenizer::train_word(&texts, 64, &BTreeSet::new()).unwrap();
        (corpus, pairs, vocab)
    }

    #[test]
    fn training_is_deterministic_in_the_seed() {
        let (corpus, pairs, vocab) = tiny_corpus();
        let config = TrainConfig { epochs: 3, batch_size: 4, ..TrainConfig::default() };
        let mut a = EmbeddingModel::init(ModelVariant::H1, 4, &vocab, 1);
        let mut b = EmbeddingModel::init(ModelVariant::H1, 4, &vocab, 1);
        let sa = train(&mut a, &pairs, &corpus, &vocab, ProductTextMode::TitleOnly, &config, &NullClock).unwrap();
        let sb = train(&mut b, &pairs, &corpus, &vocab, ProductTextMode::TitleOnly, &config, &NullClock).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        let mut c = EmbeddingModel::init(ModelVariant::H1, 4, &vocab, 1);
        let other = TrainConfig { seed: 99, ..config };
        train(&mut c, &pairs, &corpus, &vocab, ProductTextMode::TitleOnly, &other, &NullClock).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_loss_model_stays_unchanged() {
        let (corpus, pairs, vocab) = tiny_corpus();
        let mut model = EmbeddingModel::init(ModelVariant::H1, 4, &vocab, 2);
        // Give each query-product pair its own huge orthogonal axis: the
        // positive score dwarfs any in-batch negative, so every triplet
        // already clears the margin.
        for pid in [0u32, 1, 2] {
            let title = corpus.product(pid).unwrap().title.clone();
            let mut big = [0.0; 4];
            big[pid as usize] = 100.0;
            for word in title.split(' ') {
                let t = vocab.id(word).unwrap();
                model.row_mut(TableSlot::Query, t).copy_from_slice(&big);
                model.row_mut(TableSlot::Product, t).copy_from_slice(&big);
            }
        }
        let before = model.clone();
        let config = TrainConfig { epochs: 1, batch_size: 4, ..TrainConfig::default() };
        let stats = train(&mut model, &pairs, &corpus, &vocab, ProductTextMode::TitleOnly, &config, &NullClock).unwrap();
        assert_eq!(stats.epochs[0].zero_loss_fraction, 1.0);
        assert_eq!(model, before);
    }

    #[test]
    fn mean_loss_mostly_decreases_on_a_toy_set() {
        let (corpus, pairs, vocab) = tiny_corpus();
        let mut model = EmbeddingModel::init(ModelVariant::H1, 8, &vocab, 3);
        let config = TrainConfig {
            epochs: 6,
            batch_size: 4,
            learning_rate: 0.05,
            ..TrainConfig::default()
        };
        let stats = train(&mut model, &pairs, &corpus, &vocab, ProductTextMode::TitleOnly, &config, &NullClock).unwrap();
        let losses: Vec<f64> = stats.epochs.iter().map(|e| e.mean_loss).collect();
        let drops = losses.windows(2).filter(|w| w[1] <= w[0]).count();
        assert!(drops >= 4, "losses {losses:?}");
    }

    #[test]
    fn batch_size_below_two_is_fatal() {
        let (corpus, pairs, vocab) = tiny_corpus();
        let mut model = EmbeddingModel::init(ModelVariant::H1, 4, &vocab, 2);
        let config = TrainConfig { batch_size: 1, ..TrainConfig::default() };
        assert!(matches!(
            train(&mut model, &pairs, &corpus, &vocab, ProductTextMode::TitleOnly, &config, &NullClock),
            Err(Error::BatchTooSmall(1))
        ));
    }

    #[test]
    fn title_equivalent_negatives_are_never_drawn() {
        // Both products share a title; the only possible negative is always
        // title-equivalent, so every triplet is skipped and nothing moves.
        let products = vec![
            Product { product_id: 0, title: "same title".to_string(), description: None, extra_fields: BTreeMap::new() },
            Product { product_id: 1, title: "same title".to_string(), description: None, extra_fields: BTreeMap::new() },
        ];
        let queries = vec![Query { query_id: 0, text: "same".to_string() }];
        let labels = vec![
            RelevanceLabel { query_id: 0, product_id: 0, grade: Grade::Exact },
            RelevanceLabel { query_id: 0, product_id: 1, grade: Grade::Irrelevant },
        ];
        let (corpus, _) = Corpus::new(products, queries, labels).unwrap();
        let pairs = crate::corpus::build_training_pairs(corpus.labels(), 1).unwrap();
        let texts: Vec<String> = vec!["same title".to_string()];
        let vocab = crate::tokenizer::train_word(&texts, 16, &BTreeSet::new()).unwrap();
        let mut model = EmbeddingModel::init(ModelVariant::H1, 4, &vocab, 0);
        let before = model.clone();
        let config = TrainConfig { epochs: 2, batch_size: 2, ..TrainConfig::default() };
        let stats = train(&mut model, &pairs, &corpus, &vocab, ProductTextMode::TitleOnly, &config, &NullClock).unwrap();
        assert_eq!(model, before);
        assert!(stats.epochs.iter().all(|e| e.triplets == 0 && e.skipped_triplets == 1));
    }
}
