//! Per-token embedding tables and the two similarity families: mean-pooled
//! dot product (DE and SE variants) and token-wise max-sim (H1).
//!
//! No normalization is applied anywhere; both similarities are raw scalar
//! products, so rankings are invariant under positive scaling of a table.

use alloc::vec::Vec;

use crate::hash::Fingerprint;
use crate::rng::Stream;
use crate::tokenizer::{TokenSequence, Vocabulary};
use crate::{Error, Result};

/// Model architecture: H1 scores with token-wise max-sim; DE and SE score
/// with mean-pooled dot product; SE shares one table between sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelVariant {
    H1,
    De,
    Se,
}

impl ModelVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelVariant::H1 => "h1",
            ModelVariant::De => "de",
            ModelVariant::Se => "se",
        }
    }
}

/// Encoding side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Query,
    Product,
}

/// Physical table a side resolves to. SE resolves both sides to the query
/// slot, which is what makes its weights tied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TableSlot {
    Query,
    Product,
}

#[derive(Debug, Clone, PartialEq)]
enum Tables {
    Shared(Vec<f64>),
    Split { query: Vec<f64>, product: Vec<f64> },
}

/// Embedding tables for both sides, row-major `n_tokens x dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    variant: ModelVariant,
    dim: usize,
    n_tokens: usize,
    tables: Tables,
    vocab_fingerprint: u64,
    init_seed: u64,
}

/// Per-token vectors of one text, one row per token.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedText {
    pub vectors: Vec<f64>,
    pub dim: usize,
    pub token_ids: Vec<u32>,
}

impl EncodedText {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

/// Column-wise mean of an encoding's rows.
pub fn mean_rows(enc: &EncodedText) -> Vec<f64> {
    let n = enc.len();
    let mut mean = alloc::vec![0.0; enc.dim];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(enc.row(i)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    mean
}

const INIT_LABEL: u64 = 0x696e_6974; // "init"

impl EmbeddingModel {
    /// Fresh model with entries uniform in [-1/sqrt(dim), +1/sqrt(dim)],
    /// drawn in row-major order (query table first for split variants).
    pub fn init(variant: ModelVariant, dim: usize, vocab: &Vocabulary, seed: u64) -> EmbeddingModel {
        let n_tokens = vocab.len();
        let mut stream = Stream::substream(seed, INIT_LABEL);
        let half_width = 1.0 / libm::sqrt(dim as f64);
        let mut draw_table = || {
            let mut t = Vec::with_capacity(n_tokens * dim);
            for _ in 0..n_tokens * dim {
                t.push(stream.symmetric_f64(half_width));
            }
            t
        };
        let tables = match variant {
            ModelVariant::Se => Tables::Shared(draw_table()),
            ModelVariant::H1 | ModelVariant::De => Tables::Split {
                query: draw_table(),
                product: draw_table(),
            },
        };
        EmbeddingModel {
            variant,
            dim,
            n_tokens,
            tables,
            vocab_fingerprint: vocab.fingerprint(),
            init_seed: seed,
        }
    }

    /// Reassembles a model from serialized parts, validating shape and
    /// variant/table consistency.
    pub fn from_parts(
        variant: ModelVariant,
        dim: usize,
        n_tokens: usize,
        vocab_fingerprint: u64,
        init_seed: u64,
        query_table: Vec<f64>,
        product_table: Option<Vec<f64>>,
    ) -> Result<EmbeddingModel> {
        if dim == 0 || n_tokens == 0 {
            return Err(Error::Invariant("model must have positive shape".into()));
        }
        if query_table.len() != n_tokens * dim {
            return Err(Error::Invariant("query table shape mismatch".into()));
        }
        let tables = match (variant, product_table) {
            (ModelVariant::Se, None) => Tables::Shared(query_table),
            (ModelVariant::H1 | ModelVariant::De, Some(p)) => {
                if p.len() != n_tokens * dim {
                    return Err(Error::Invariant("product table shape mismatch".into()));
                }
                Tables::Split {
                    query: query_table,
                    product: p,
                }
            }
            _ => {
                return Err(Error::Invariant(
                    "variant and table count are inconsistent".into(),
                ))
            }
        };
        let model = EmbeddingModel {
            variant,
            dim,
            n_tokens,
            tables,
            vocab_fingerprint,
            init_seed,
        };
        for &slot in model.slots() {
            if model.table(slot).iter().any(|v| !v.is_finite()) {
                return Err(Error::Invariant("non-finite table entry".into()));
            }
        }
        Ok(model)
    }

    pub fn variant(&self) -> ModelVariant {
        self.variant
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_tokens(&self) -> usize {
        self.n_tokens
    }

    pub fn vocab_fingerprint(&self) -> u64 {
        self.vocab_fingerprint
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    /// The physical slots this model owns: one for SE, two otherwise.
    pub fn slots(&self) -> &'static [TableSlot] {
        match self.tables {
            Tables::Shared(_) => &[TableSlot::Query],
            Tables::Split { .. } => &[TableSlot::Query, TableSlot::Product],
        }
    }

    /// Resolve a logical side to its physical slot (SE ties both sides to
    /// the query slot).
    pub fn slot_of(&self, side: Side) -> TableSlot {
        match (&self.tables, side) {
            (Tables::Shared(_), _) | (_, Side::Query) => TableSlot::Query,
            (_, Side::Product) => TableSlot::Product,
        }
    }

    pub fn table(&self, slot: TableSlot) -> &[f64] {
        match (&self.tables, slot) {
            (Tables::Shared(t), _) | (Tables::Split { query: t, .. }, TableSlot::Query) => t,
            (Tables::Split { product: t, .. }, TableSlot::Product) => t,
        }
    }

    pub fn row(&self, side: Side, token_id: u32) -> &[f64] {
        let t = self.table(self.slot_of(side));
        let i = token_id as usize;
        &t[i * self.dim..(i + 1) * self.dim]
    }

    /// Mutable access to one embedding row; the optimizer's write path.
    pub fn row_mut(&mut self, slot: TableSlot, token_id: u32) -> &mut [f64] {
        let dim = self.dim;
        let t = match (&mut self.tables, slot) {
            (Tables::Shared(t), _) | (Tables::Split { query: t, .. }, TableSlot::Query) => t,
            (Tables::Split { product: t, .. }, TableSlot::Product) => t,
        };
        let i = token_id as usize;
        &mut t[i * dim..(i + 1) * dim]
    }

    pub(crate) fn table_mut(&mut self, slot: TableSlot) -> &mut [f64] {
        match (&mut self.tables, slot) {
            (Tables::Shared(t), _) | (Tables::Split { query: t, .. }, TableSlot::Query) => t,
            (Tables::Split { product: t, .. }, TableSlot::Product) => t,
        }
    }

    /// Fails unless the vocabulary is the one this model was trained
    /// against.
    pub fn verify_vocab(&self, vocab: &Vocabulary) -> Result<()> {
        let actual = vocab.fingerprint();
        if actual != self.vocab_fingerprint {
            return Err(Error::VocabFingerprintMismatch {
                expected: self.vocab_fingerprint,
                actual,
            });
        }
        Ok(())
    }

    /// Hash binding downstream artifacts (indexes) to these exact tables.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fingerprint::new();
        h.write_u8(match self.variant {
            ModelVariant::H1 => 0,
            ModelVariant::De => 1,
            ModelVariant::Se => 2,
        });
        h.write_u64(self.dim as u64);
        h.write_u64(self.n_tokens as u64);
        h.write_u64(self.vocab_fingerprint);
        h.write_u64(self.init_seed);
        for slot in self.slots() {
            for &v in self.table(*slot) {
                h.write_f64(v);
            }
        }
        h.finish()
    }
}

/// Look up each token's embedding row; no pooling, no normalization.
pub fn encode(model: &EmbeddingModel, side: Side, tokens: &TokenSequence) -> Result<EncodedText> {
    let dim = model.dim();
    let mut vectors = Vec::with_capacity(tokens.len() * dim);
    for &id in &tokens.ids {
        if id as usize >= model.n_tokens() {
            return Err(Error::TokenOutOfRange {
                id,
                vocab_size: model.n_tokens(),
            });
        }
        vectors.extend_from_slice(model.row(side, id));
    }
    Ok(EncodedText {
        vectors,
        dim,
        token_ids: tokens.ids.clone(),
    })
}

fn check_compatible(q: &EncodedText, p: &EncodedText) -> Result<()> {
    if q.is_empty() || p.is_empty() {
        return Err(Error::EmptyEncoding);
    }
    if q.dim != p.dim {
        return Err(Error::DimMismatch {
            left: q.dim,
            right: p.dim,
        });
    }
    Ok(())
}

/// Mean-pooled dot product: meanRows(q) . meanRows(p).
pub fn sim_pooled(q: &EncodedText, p: &EncodedText) -> Result<f64> {
    check_compatible(q, p)?;
    Ok(dot(&mean_rows(q), &mean_rows(p)))
}

/// Token-wise max-sim: sum over query tokens of the maximum dot product
/// against any product token.
pub fn sim_maxsim(q: &EncodedText, p: &EncodedText) -> Result<f64> {
    check_compatible(q, p)?;
    let mut total = 0.0;
    for i in 0..q.len() {
        let qi = q.row(i);
        let mut best = f64::NEG_INFINITY;
        for j in 0..p.len() {
            let d = dot(qi, p.row(j));
            if d > best {
                best = d;
            }
        }
        total += best;
    }
    Ok(total)
}

/// The single scoring entry point: max-sim for H1, pooled for DE and SE.
pub fn score(
    model: &EmbeddingModel,
    q_tokens: &TokenSequence,
    p_tokens: &TokenSequence,
) -> Result<f64> {
    let q = encode(model, Side::Query, q_tokens)?;
    let p = encode(model, Side::Product, p_tokens)?;
    match model.variant() {
        ModelVariant::H1 => sim_maxsim(&q, &p),
        ModelVariant::De | ModelVariant::Se => sim_pooled(&q, &p),
    }
}
