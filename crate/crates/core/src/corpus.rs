//! Corpus records, text normalization and training-pair assembly.
//!
//! Products, queries and graded relevance labels arrive from tab-separated
//! files (parsed by the companion crate); this module owns the validated
//! in-memory form, the normalization applied to every piece of text in the
//! pipeline, and the class-balanced positive/negative pair construction used
//! by the trainer.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use unicode_normalization::UnicodeNormalization;

use crate::rng::Stream;
use crate::{Error, Result};

/// One catalog item. `extra_fields` carries columns the scorer ignores.
#[derive(Debug, Clone, PartialEq)]
pub struct Product {
    pub product_id: u32,
    pub title: String,
    pub description: Option<String>,
    pub extra_fields: BTreeMap<String, String>,
}

/// One search query.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub query_id: u32,
    pub text: String,
}

/// Graded relevance judgment for a query-product pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grade {
    Exact,
    Partial,
    Irrelevant,
}

impl Grade {
    /// Case-insensitive parse of the grade strings used by the label file.
    pub fn parse(s: &str) -> Option<Grade> {
        if s.eq_ignore_ascii_case("exact") {
            Some(Grade::Exact)
        } else if s.eq_ignore_ascii_case("partial") {
            Some(Grade::Partial)
        } else if s.eq_ignore_ascii_case("irrelevant") {
            Some(Grade::Irrelevant)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceLabel {
    pub query_id: u32,
    pub product_id: u32,
    pub grade: Grade,
}

/// A training example: `target` is +1 for Exact and -1 for Irrelevant.
/// Partial labels never become training pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingPair {
    pub query_id: u32,
    pub product_id: u32,
    pub target: i8,
}

/// Which product fields feed the product-side text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProductTextMode {
    TitleOnly,
    TitleAndDescription,
}

/// Labels dropped during validation because an id did not resolve.
#[derive(Debug, Clone, Default)]
pub struct CorpusWarnings {
    pub dangling_labels: Vec<RelevanceLabel>,
}

/// Lowercase, canonically compose (NFC), collapse whitespace runs to single
/// spaces, and strip leading/trailing whitespace. Total: never fails.
pub fn normalize_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_space = false;
    for ch in raw.chars().flat_map(|c| c.to_lowercase()).nfc() {
        if ch.is_whitespace() {
            if !out.is_empty() {
                pending_space = true;
            }
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        out.push(ch);
    }
    out
}

/// Validated, immutable corpus. Text is normalized at construction and
/// records are keyed by id, so every iteration runs in ascending-id order.
#[derive(Debug, Clone)]
pub struct Corpus {
    products: BTreeMap<u32, Product>,
    queries: BTreeMap<u32, Query>,
    labels: Vec<RelevanceLabel>,
}

impl Corpus {
    /// Validates uniqueness and non-emptiness, normalizes all text, and drops
    /// labels whose query or product id does not resolve (returned as
    /// warnings, matching the loader's drop-with-warning contract).
    pub fn new(
        products: Vec<Product>,
        queries: Vec<Query>,
        labels: Vec<RelevanceLabel>,
    ) -> Result<(Corpus, CorpusWarnings)> {
        let mut products_by_id = BTreeMap::new();
        for mut p in products {
            p.title = normalize_text(&p.title);
            if p.title.is_empty() {
                return Err(Error::EmptyTitle(p.product_id));
            }
            p.description = p
                .description
                .map(|d| normalize_text(&d))
                .filter(|d| !d.is_empty());
            let id = p.product_id;
            if products_by_id.insert(id, p).is_some() {
                return Err(Error::DuplicateProductId(id));
            }
        }

        let mut queries_by_id = BTreeMap::new();
        for mut q in queries {
            q.text = normalize_text(&q.text);
            if q.text.is_empty() {
                return Err(Error::EmptyQueryText(q.query_id));
            }
            let id = q.query_id;
            if queries_by_id.insert(id, q).is_some() {
                return Err(Error::DuplicateQueryId(id));
            }
        }

        let mut seen_pairs = BTreeSet::new();
        let mut kept = Vec::with_capacity(labels.len());
        let mut warnings = CorpusWarnings::default();
        for l in labels {
            if !seen_pairs.insert((l.query_id, l.product_id)) {
                return Err(Error::DuplicateLabel {
                    query_id: l.query_id,
                    product_id: l.product_id,
                });
            }
            if !products_by_id.contains_key(&l.product_id)
                || !queries_by_id.contains_key(&l.query_id)
            {
                warnings.dangling_labels.push(l);
            } else {
                kept.push(l);
            }
        }

        Ok((
            Corpus {
                products: products_by_id,
                queries: queries_by_id,
                labels: kept,
            },
            warnings,
        ))
    }

    pub fn products(&self) -> &BTreeMap<u32, Product> {
        &self.products
    }

    pub fn queries(&self) -> &BTreeMap<u32, Query> {
        &self.queries
    }

    pub fn labels(&self) -> &[RelevanceLabel] {
        &self.labels
    }

    pub fn product(&self, id: u32) -> Option<&Product> {
        self.products.get(&id)
    }

    pub fn query(&self, id: u32) -> Option<&Query> {
        self.queries.get(&id)
    }

    /// Product-side text under the configured mode. Already normalized.
    pub fn product_text(&self, id: u32, mode: ProductTextMode) -> Result<String> {
        let p = self.product(id).ok_or(Error::UnknownProduct(id))?;
        Ok(assemble_product_text(p, mode))
    }
}

/// Title, or title + " " + description, both already normalized.
pub fn assemble_product_text(p: &Product, mode: ProductTextMode) -> String {
    match (mode, &p.description) {
        (ProductTextMode::TitleAndDescription, Some(d)) => {
            let mut t = String::with_capacity(p.title.len() + 1 + d.len());
            t.push_str(&p.title);
            t.push(' ');
            t.push_str(d);
            t
        }
        _ => p.title.clone(),
    }
}

/// Class-balanced training pairs: Partial grades are dropped, the majority
/// class is downsampled uniformly at random (seeded) to the minority count,
/// and the combined set is shuffled deterministically by the same seed.
pub fn build_training_pairs(labels: &[RelevanceLabel], seed: u64) -> Result<Vec<TrainingPair>> {
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for l in labels {
        match l.grade {
            Grade::Exact => positives.push(TrainingPair {
                query_id: l.query_id,
                product_id: l.product_id,
                target: 1,
            }),
            Grade::Irrelevant => negatives.push(TrainingPair {
                query_id: l.query_id,
                product_id: l.product_id,
                target: -1,
            }),
            Grade::Partial => {}
        }
    }
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::Unbalanceable {
            exact: positives.len(),
            irrelevant: negatives.len(),
        });
    }

    let mut rng = Stream::substream(seed, 0x7061_6972); // "pair"
    let minority = positives.len().min(negatives.len());
    let (majority_side, minority_side) = if positives.len() >= negatives.len() {
        (&mut positives, &mut negatives)
    } else {
        (&mut negatives, &mut positives)
    };
    rng.shuffle(majority_side);
    majority_side.truncate(minority);

    let mut pairs = Vec::with_capacity(2 * minority);
    pairs.append(minority_side);
    pairs.append(majority_side);
    rng.shuffle(&mut pairs);
    Ok(pairs)
}
