//! Product-search metrics: P@k, R@k and mAP@k under a title-equivalence
//! relation (two products match iff their normalized titles are equal).
//!
//! mAP@k is the plain mean of P@1..P@k. That is deliberately not the
//! conventional average precision (which averages only at relevant ranks);
//! [`average_precision_at_k`] provides the conventional form for
//! comparison.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::corpus::{Corpus, Grade};
use crate::{Error, Result};

/// Partition of products into title-equivalence classes.
#[derive(Debug, Clone)]
pub struct EquivalenceMap {
    class_of: BTreeMap<u32, u32>,
    class_count: u32,
}

impl EquivalenceMap {
    /// Classes keyed on exact normalized-title equality, numbered in
    /// ascending product-id order of first appearance.
    pub fn from_corpus(corpus: &Corpus) -> EquivalenceMap {
        let mut by_title: BTreeMap<&str, u32> = BTreeMap::new();
        let mut class_of = BTreeMap::new();
        let mut next = 0;
        for (&pid, product) in corpus.products() {
            let class = *by_title.entry(product.title.as_str()).or_insert_with(|| {
                next += 1;
                next - 1
            });
            class_of.insert(pid, class);
        }
        EquivalenceMap {
            class_of,
            class_count: next,
        }
    }

    pub fn class_of(&self, product_id: u32) -> Result<u32> {
        self.class_of
            .get(&product_id)
            .copied()
            .ok_or(Error::UnknownProduct(product_id))
    }

    pub fn class_count(&self) -> u32 {
        self.class_count
    }

    fn classes_of(&self, ids: &BTreeSet<u32>) -> Result<BTreeSet<u32>> {
        ids.iter().map(|&p| self.class_of(p)).collect()
    }
}

/// Ground truth for one query.
#[derive(Debug, Clone)]
pub struct QueryJudgments {
    pub query_id: u32,
    pub ground_truth: BTreeSet<u32>,
}

/// Ground-truth sets per query: Exact-grade products, optionally admitting
/// Partial for sensitivity analysis. Queries judged only irrelevant get an
/// empty set (they are excluded and reported at evaluation time).
pub fn collect_judgments(corpus: &Corpus, include_partial: bool) -> BTreeMap<u32, QueryJudgments> {
    let mut out: BTreeMap<u32, QueryJudgments> = BTreeMap::new();
    for label in corpus.labels() {
        let keep = label.grade == Grade::Exact || (include_partial && label.grade == Grade::Partial);
        let entry = out.entry(label.query_id).or_insert_with(|| QueryJudgments {
            query_id: label.query_id,
            ground_truth: BTreeSet::new(),
        });
        if keep {
            entry.ground_truth.insert(label.product_id);
        }
    }
    out
}

/// The subset of `ranked` equivalent to any member of `truth`, in `ranked`
/// order.
pub fn equivalence_match(
    ranked: &[u32],
    truth: &BTreeSet<u32>,
    eq: &EquivalenceMap,
) -> Result<Vec<u32>> {
    let truth_classes = eq.classes_of(truth)?;
    let mut out = Vec::new();
    for &p in ranked {
        if truth_classes.contains(&eq.class_of(p)?) {
            out.push(p);
        }
    }
    Ok(out)
}

fn matched_prefix_flags(
    ranked: &[u32],
    truth: &BTreeSet<u32>,
    eq: &EquivalenceMap,
    k: usize,
) -> Result<Vec<bool>> {
    let truth_classes = eq.classes_of(truth)?;
    ranked
        .iter()
        .take(k)
        .map(|&p| Ok(truth_classes.contains(&eq.class_of(p)?)))
        .collect()
}

/// Matches in the top k divided by k; the denominator stays k even when
/// fewer than k items were retrieved.
pub fn precision_at_k(
    ranked: &[u32],
    truth: &BTreeSet<u32>,
    eq: &EquivalenceMap,
    k: usize,
) -> Result<f64> {
    let hits = matched_prefix_flags(ranked, truth, eq, k)?
        .iter()
        .filter(|&&h| h)
        .count();
    Ok(hits as f64 / k as f64)
}

/// Mean of P@1..P@k.
pub fn map_at_k(
    ranked: &[u32],
    truth: &BTreeSet<u32>,
    eq: &EquivalenceMap,
    k: usize,
) -> Result<f64> {
    let flags = matched_prefix_flags(ranked, truth, eq, k)?;
    let mut hits = 0usize;
    let mut sum = 0.0;
    for i in 1..=k {
        if flags.get(i - 1).copied().unwrap_or(false) {
            hits += 1;
        }
        sum += hits as f64 / i as f64;
    }
    Ok(sum / k as f64)
}

/// Conventional average precision at k: precision summed at relevant ranks
/// only, divided by min(|truth classes|, k). Provided for comparison with
/// [`map_at_k`]; not used in headline reports.
pub fn average_precision_at_k(
    ranked: &[u32],
    truth: &BTreeSet<u32>,
    eq: &EquivalenceMap,
    k: usize,
) -> Result<f64> {
    let flags = matched_prefix_flags(ranked, truth, eq, k)?;
    let truth_classes = eq.classes_of(truth)?.len();
    if truth_classes == 0 {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &hit) in flags.iter().enumerate() {
        if hit {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Ok(sum / truth_classes.min(k) as f64)
}

/// Distinct ground-truth classes hit in the top k, divided by the number of
/// ground-truth classes. Class-level counting on both sides keeps duplicate
/// titles from inflating recall.
pub fn recall_at_k(
    ranked: &[u32],
    truth: &BTreeSet<u32>,
    eq: &EquivalenceMap,
    k: usize,
) -> Result<f64> {
    let truth_classes = eq.classes_of(truth)?;
    if truth_classes.is_empty() {
        return Err(Error::Invariant("recall over empty ground truth".into()));
    }
    let mut hit: BTreeSet<u32> = BTreeSet::new();
    for &p in ranked.iter().take(k) {
        let c = eq.class_of(p)?;
        if truth_classes.contains(&c) {
            hit.insert(c);
        }
    }
    Ok(hit.len() as f64 / truth_classes.len() as f64)
}

/// Metrics of one query at one cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryMetrics {
    pub query_id: u32,
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
    pub map: f64,
}

/// Unweighted means over evaluated queries at one cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateMetrics {
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
    pub map: f64,
}

/// Per-query and aggregate metrics, plus the queries that were excluded.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub per_query: Vec<QueryMetrics>,
    pub aggregates: Vec<AggregateMetrics>,
    pub evaluated: usize,
    /// Queries in the run with no judgments at all.
    pub skipped_unjudged: Vec<u32>,
    /// Queries judged but with empty ground truth.
    pub skipped_empty_truth: Vec<u32>,
}

/// Evaluate a run (query id -> ranked product ids) at each cutoff in `ks`.
/// Queries without judgments or with empty ground truth are excluded and
/// listed in the report.
pub fn evaluate(
    run: &BTreeMap<u32, Vec<u32>>,
    judgments: &BTreeMap<u32, QueryJudgments>,
    eq: &EquivalenceMap,
    ks: &[usize],
) -> Result<EvalReport> {
    let mut report = EvalReport {
        per_query: Vec::new(),
        aggregates: Vec::new(),
        evaluated: 0,
        skipped_unjudged: Vec::new(),
        skipped_empty_truth: Vec::new(),
    };
    let mut sums: BTreeMap<usize, (f64, f64, f64)> = ks.iter().map(|&k| (k, (0.0, 0.0, 0.0))).collect();
    for (&qid, ranked) in run {
        let truth = match judgments.get(&qid) {
            None => {
                report.skipped_unjudged.push(qid);
                continue;
            }
            Some(j) if j.ground_truth.is_empty() => {
                report.skipped_empty_truth.push(qid);
                continue;
            }
            Some(j) => &j.ground_truth,
        };
        report.evaluated += 1;
        for &k in ks {
            let row = QueryMetrics {
                query_id: qid,
                k,
                precision: precision_at_k(ranked, truth, eq, k)?,
                recall: recall_at_k(ranked, truth, eq, k)?,
                map: map_at_k(ranked, truth, eq, k)?,
            };
            let s = sums.get_mut(&k).expect("cutoff registered");
            s.0 += row.precision;
            s.1 += row.recall;
            s.2 += row.map;
            report.per_query.push(row);
        }
    }
    let n = report.evaluated.max(1) as f64;
    for &k in ks {
        let (p, r, m) = sums[&k];
        report.aggregates.push(AggregateMetrics {
            k,
            precision: p / n,
            recall: r / n,
            map: m / n,
        });
    }
    Ok(report)
}
