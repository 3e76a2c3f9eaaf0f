use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{
    append_byte_block, order_specials, viterbi_segment, word_frequencies, TokenSequence,
    TokenizerKind, Vocabulary, UNIGRAM_SMOOTHING,
};
use crate::{Error, Result};

/// Unigram training knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct UnigramParams {
    /// Seed inventory size as a multiple of the target vocabulary size.
    pub seed_multiplier: f64,
    /// Fraction of prunable pieces removed per pruning round.
    pub prune_fraction: f64,
    /// Maximum piece length in characters.
    pub max_piece_len: usize,
    /// Viterbi re-estimation rounds between pruning rounds.
    pub em_rounds: usize,
}

impl Default for UnigramParams {
    fn default() -> Self {
        UnigramParams {
            seed_multiplier: 4.0,
            prune_fraction: 0.25,
            max_piece_len: 16,
            em_rounds: 2,
        }
    }
}

fn smoothed_log_probs(counts: &BTreeMap<String, f64>, n_tokens: usize) -> BTreeMap<String, f64> {
    let total: f64 = counts.values().sum();
    let denom = total + UNIGRAM_SMOOTHING * n_tokens as f64;
    counts
        .iter()
        .map(|(t, &c)| (t.clone(), libm::log((c + UNIGRAM_SMOOTHING) / denom)))
        .collect()
}

/// One hard-EM round: Viterbi-segment every word, accumulate piece counts,
/// re-estimate smoothed log-probabilities.
fn em_round(
    words: &[(String, u64)],
    pieces: &mut BTreeMap<String, f64>,
    max_piece_len: usize,
) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, f64> = pieces.keys().map(|t| (t.clone(), 0.0)).collect();
    for (word, f) in words {
        let lookup = |p: &str| pieces.get(p).copied();
        let (ranges, _) = viterbi_segment(word, max_piece_len, &lookup)
            .expect("single characters always cover the word");
        for (a, b) in ranges {
            *counts.get_mut(&word[a..b]).expect("piece from lookup") += *f as f64;
        }
    }
    *pieces = smoothed_log_probs(&counts, counts.len());
    counts
}

pub(super) fn train(
    corpus_texts: &[String],
    vocab_size: usize,
    special_terms: &BTreeSet<String>,
    params: &UnigramParams,
) -> Result<Vocabulary> {
    if corpus_texts.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let specials_ordered = order_specials(special_terms);
    let (freqs, special_counts) = word_frequencies(corpus_texts, &specials_ordered);

    let mut alphabet: BTreeSet<String> = BTreeSet::new();
    for w in freqs.keys() {
        alphabet.extend(w.chars().map(|c| c.to_string()));
    }
    let minimum = special_terms.len() + alphabet.len();
    if vocab_size < minimum {
        return Err(Error::VocabTooSmall {
            requested: vocab_size,
            minimum,
        });
    }
    let budget = vocab_size - special_terms.len();

    // Seed with every substring up to max_piece_len chars, scored by corpus
    // frequency; cap the inventory, but never drop single characters.
    let mut seed_scores: BTreeMap<String, u64> = BTreeMap::new();
    for (word, &f) in &freqs {
        let chars: Vec<usize> = word
            .char_indices()
            .map(|(i, _)| i)
            .chain(core::iter::once(word.len()))
            .collect();
        let n = chars.len() - 1;
        for i in 0..n {
            for j in (i + 1)..=(i + params.max_piece_len).min(n) {
                *seed_scores.entry(word[chars[i]..chars[j]].to_string()).or_insert(0) += f;
            }
        }
    }
    let cap = ((params.seed_multiplier * vocab_size as f64) as usize).max(alphabet.len());
    let mut multis: Vec<(&String, u64)> = seed_scores
        .iter()
        .filter(|(t, _)| !alphabet.contains(*t))
        .map(|(t, &s)| (t, s))
        .collect();
    multis.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    multis.truncate(cap.saturating_sub(alphabet.len()));

    let mut seed_counts: BTreeMap<String, f64> = alphabet
        .iter()
        .map(|c| (c.clone(), *seed_scores.get(c).unwrap_or(&0) as f64))
        .collect();
    seed_counts.extend(multis.into_iter().map(|(t, s)| (t.clone(), s as f64)));
    let n0 = seed_counts.len();
    let mut pieces = smoothed_log_probs(&seed_counts, n0);

    let words: Vec<(String, u64)> = freqs.into_iter().collect();
    let mut final_counts;
    loop {
        final_counts = BTreeMap::new();
        for _ in 0..params.em_rounds.max(1) {
            final_counts = em_round(&words, &mut pieces, params.max_piece_len);
        }
        if pieces.len() <= budget {
            break;
        }

        // Loss increase from banning each multi-char piece, measured on the
        // words whose best segmentation uses it.
        let mut deltas: BTreeMap<String, f64> = BTreeMap::new();
        for (word, f) in &words {
            let lookup = |p: &str| pieces.get(p).copied();
            let (ranges, best_lp) = viterbi_segment(word, params.max_piece_len, &lookup)
                .expect("single characters always cover the word");
            let used: BTreeSet<&str> = ranges
                .iter()
                .map(|&(a, b)| &word[a..b])
                .filter(|p| !alphabet.contains(*p))
                .collect();
            for t in used {
                let banned = |p: &str| if p == t { None } else { pieces.get(p).copied() };
                let (_, lp) = viterbi_segment(word, params.max_piece_len, &banned)
                    .expect("single characters always cover the word");
                *deltas.entry(t.to_string()).or_insert(0.0) += *f as f64 * (best_lp - lp);
            }
        }

        let mut prunable: Vec<(f64, &String)> = pieces
            .keys()
            .filter(|t| !alphabet.contains(*t))
            .map(|t| (deltas.get(t).copied().unwrap_or(0.0), t))
            .collect();
        prunable.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        let excess = pieces.len() - budget;
        let round = ((params.prune_fraction * prunable.len() as f64) as usize).max(1);
        let doomed: Vec<String> = prunable
            .into_iter()
            .take(excess.min(round))
            .map(|(_, t)| t.clone())
            .collect();
        for t in doomed {
            pieces.remove(&t);
        }
    }

    // Final inventory: specials, then pieces, then the byte block; smoothed
    // log-probabilities over the whole inventory (byte tokens count zero).
    let mut tokens: Vec<String> = special_terms.iter().cloned().collect();
    tokens.extend(pieces.keys().cloned());
    let byte_base = append_byte_block(&mut tokens);
    let total: f64 = final_counts.values().sum::<f64>()
        + special_counts.values().map(|&c| c as f64).sum::<f64>();
    let denom = total + UNIGRAM_SMOOTHING * tokens.len() as f64;
    let log_probs: Vec<f64> = tokens
        .iter()
        .map(|t| {
            let c = final_counts
                .get(t)
                .copied()
                .or_else(|| special_counts.get(t).map(|&c| c as f64))
                .unwrap_or(0.0);
            libm::log((c + UNIGRAM_SMOOTHING) / denom)
        })
        .collect();

    Vocabulary::from_parts(
        TokenizerKind::Unigram,
        tokens,
        special_terms.clone(),
        Vec::new(),
        log_probs,
        None,
        Some(byte_base),
    )
}

/// Viterbi segmentation against the trained piece probabilities.
pub(super) fn apply(vocab: &Vocabulary, chunk: &str, word_start: bool, seq: &mut TokenSequence) {
    let lookup = |p: &str| vocab.log_prob_of(p);
    let (ranges, _) = viterbi_segment(chunk, vocab.max_piece_chars, &lookup)
        .expect("caller filters to in-alphabet chars");
    for (k, (a, b)) in ranges.into_iter().enumerate() {
        let piece = &chunk[a..b];
        let id = vocab.id(piece).expect("piece from lookup");
        seq.push(id, piece.to_string(), word_start && k == 0);
    }
}
