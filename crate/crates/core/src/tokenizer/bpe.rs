use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{
    append_byte_block, order_specials, word_frequencies, TokenSequence, TokenizerKind, Vocabulary,
};
use crate::{Error, Result};

/// Candidate merge, ordered so the heap maximum is the highest-count pair,
/// ties broken toward the lexicographically smallest surface pair.
#[derive(PartialEq, Eq)]
struct Candidate {
    count: u64,
    left: String,
    right: String,
    pair: (u32, u32),
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| (&other.left, &other.right).cmp(&(&self.left, &self.right)))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

fn adjacent_pairs(pieces: &[u32]) -> Vec<(u32, u32)> {
    pieces.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Merge every left-to-right occurrence of `pair` in `pieces`.
fn merge_in_word(pieces: &[u32], pair: (u32, u32), result: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(pieces.len());
    let mut i = 0;
    while i < pieces.len() {
        if i + 1 < pieces.len() && pieces[i] == pair.0 && pieces[i + 1] == pair.1 {
            out.push(result);
            i += 2;
        } else {
            out.push(pieces[i]);
            i += 1;
        }
    }
    out
}

pub(super) fn train(
    corpus_texts: &[String],
    vocab_size: usize,
    special_terms: &BTreeSet<String>,
) -> Result<Vocabulary> {
    if corpus_texts.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let specials_ordered = order_specials(special_terms);
    let (freqs, _) = word_frequencies(corpus_texts, &specials_ordered);

    let mut alphabet: BTreeSet<char> = BTreeSet::new();
    for w in freqs.keys() {
        alphabet.extend(w.chars());
    }
    let minimum = special_terms.len() + alphabet.len();
    if vocab_size < minimum {
        return Err(Error::VocabTooSmall {
            requested: vocab_size,
            minimum,
        });
    }

    let mut tokens: Vec<String> = special_terms.iter().cloned().collect();
    tokens.extend(alphabet.iter().map(|c| c.to_string()));
    let mut ids: BTreeMap<String, u32> = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i as u32))
        .collect();

    // Distinct words as piece-id sequences; lexicographic word order keeps
    // every downstream iteration deterministic.
    let mut words: Vec<(Vec<u32>, u64)> = freqs
        .iter()
        .map(|(w, &f)| {
            let pieces = w.chars().map(|c| ids[&c.to_string()]).collect();
            (pieces, f)
        })
        .collect();

    let mut counts: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    let mut occurs: BTreeMap<(u32, u32), BTreeSet<usize>> = BTreeMap::new();
    for (wi, (pieces, f)) in words.iter().enumerate() {
        for p in adjacent_pairs(pieces) {
            *counts.entry(p).or_insert(0) += f;
            occurs.entry(p).or_default().insert(wi);
        }
    }

    let mut heap: BinaryHeap<Candidate> = BinaryHeap::new();
    let push_candidate = |heap: &mut BinaryHeap<Candidate>, tokens: &[String], pair: (u32, u32), count: u64| {
        heap.push(Candidate {
            count,
            left: tokens[pair.0 as usize].clone(),
            right: tokens[pair.1 as usize].clone(),
            pair,
        });
    };
    for (&pair, &count) in &counts {
        push_candidate(&mut heap, &tokens, pair, count);
    }

    let mut merges: Vec<(String, String)> = Vec::new();
    while tokens.len() < vocab_size {
        // Lazy deletion: pop until an entry matches the live count.
        let best = loop {
            match heap.pop() {
                None => break None,
                Some(c) => {
                    if c.count > 0 && counts.get(&c.pair).copied().unwrap_or(0) == c.count {
                        break Some(c);
                    }
                }
            }
        };
        let Some(best) = best else { break };

        let joined = alloc::format!("{}{}", best.left, best.right);
        let result = *ids.entry(joined.clone()).or_insert_with(|| {
            tokens.push(joined);
            (tokens.len() - 1) as u32
        });
        merges.push((best.left, best.right));

        let affected = occurs.remove(&best.pair).unwrap_or_default();
        let mut touched: BTreeSet<(u32, u32)> = BTreeSet::new();
        for wi in affected {
            let f = words[wi].1;
            let old = adjacent_pairs(&words[wi].0);
            let merged = merge_in_word(&words[wi].0, best.pair, result);
            let new = adjacent_pairs(&merged);
            words[wi].0 = merged;

            for &p in &old {
                *counts.get_mut(&p).expect("counted pair") -= f;
            }
            for &p in &new {
                *counts.entry(p).or_insert(0) += f;
            }
            let old_set: BTreeSet<_> = old.iter().copied().collect();
            let new_set: BTreeSet<_> = new.iter().copied().collect();
            for &p in old_set.difference(&new_set) {
                if let Some(s) = occurs.get_mut(&p) {
                    s.remove(&wi);
                }
            }
            for &p in new_set.difference(&old_set) {
                occurs.entry(p).or_default().insert(wi);
            }
            touched.extend(old_set);
            touched.extend(new_set);
        }
        for p in touched {
            match counts.get(&p).copied() {
                Some(0) => {
                    counts.remove(&p);
                    occurs.remove(&p);
                }
                Some(c) if p != best.pair => push_candidate(&mut heap, &tokens, p, c),
                _ => {}
            }
        }
    }

    let byte_base = append_byte_block(&mut tokens);
    Vocabulary::from_parts(
        TokenizerKind::Bpe,
        tokens,
        special_terms.clone(),
        merges,
        Vec::new(),
        None,
        Some(byte_base),
    )
}

/// Rank-greedy merge application: repeatedly merge the adjacent pair with
/// the lowest merge rank, left to right, until none applies.
pub(super) fn apply(vocab: &Vocabulary, chunk: &str, word_start: bool, seq: &mut TokenSequence) {
    let mut buf = [0u8; 4];
    let mut pieces: Vec<u32> = chunk
        .chars()
        .map(|c| {
            vocab
                .id(c.encode_utf8(&mut buf))
                .expect("caller filters to in-alphabet chars")
        })
        .collect();

    loop {
        let mut best: Option<(u32, (u32, u32), u32)> = None; // (rank, pair, result)
        for w in pieces.windows(2) {
            if let Some(&(rank, result)) = vocab.pair_merge.get(&(w[0], w[1])) {
                if best.map_or(true, |(r, _, _)| rank < r) {
                    best = Some((rank, (w[0], w[1]), result));
                }
            }
        }
        let Some((_, pair, result)) = best else { break };
        pieces = merge_in_word(&pieces, pair, result);
    }

    for (k, &id) in pieces.iter().enumerate() {
        let surface = vocab.surface(id).expect("piece id in vocab").to_string();
        seq.push(id, surface, word_start && k == 0);
    }
}
