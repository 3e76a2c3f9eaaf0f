//! Word, BPE and unigram tokenizers with multi-word special terms.
//!
//! Each tokenizer kind comes in a plain variant and an "mt" variant whose
//! vocabulary is augmented with externally supplied special terms (brand
//! names). Special terms may contain spaces and are matched first by a
//! longest-match left-to-right scan over the normalized text, crossing
//! whitespace; the remaining spans are segmented per kind. With an empty
//! special-term set the mt and plain variants coincide exactly.
//!
//! Tokenization is total: the word tokenizer falls back to a reserved
//! `<UNK>` id (keeping the original surface), and the subword tokenizers
//! fall back to single characters, then to reserved byte tokens for
//! characters outside the training alphabet.

mod bpe;
mod unigram;
mod word;

pub use unigram::UnigramParams;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::hash::Fingerprint;
use crate::{Error, Result};

/// Tokenizer family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TokenizerKind {
    Word,
    Bpe,
    Unigram,
}

impl TokenizerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TokenizerKind::Word => "word",
            TokenizerKind::Bpe => "bpe",
            TokenizerKind::Unigram => "unigram",
        }
    }
}

/// Reserved surface of the word tokenizer's unknown token. The uppercase
/// letters cannot collide with normalized (lowercased) corpus tokens.
pub const UNK_SURFACE: &str = "<UNK>";

/// Smoothing constant for unigram log-probabilities; keeps every token's
/// probability finite and below 1.
pub(crate) const UNIGRAM_SMOOTHING: f64 = 0.1;

fn byte_surface(b: u8) -> String {
    // Uppercase 'B' guarantees no collision with corpus-derived tokens.
    alloc::format!("<B:{b:02x}>")
}

/// Trained token inventory.
///
/// Token ids are dense and 0-based. The subword kinds carry a reserved block
/// of 256 byte tokens (outside the requested vocabulary budget) so that
/// tokenization stays total on characters never seen in training.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    kind: TokenizerKind,
    tokens: Vec<String>,
    token_to_id: BTreeMap<String, u32>,
    special_terms: BTreeSet<String>,
    merges: Vec<(String, String)>,
    token_log_probs: Vec<f64>,
    unk_id: Option<u32>,
    byte_base: Option<u32>,
    // derived
    specials_ordered: Vec<String>,
    pair_merge: BTreeMap<(u32, u32), (u32, u32)>, // (left,right) -> (rank, result)
    max_piece_chars: usize,
}

/// Token ids with their parallel surfaces and word-boundary flags.
///
/// `surfaces[i]` is the actual text span the token covers (so out-of-vocab
/// words keep their surface even when `ids[i]` is the UNK id), and
/// `word_starts[i]` records whether a space precedes the token in the source
/// text. [`TokenSequence::reconstruct`] is the joining rule.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub surfaces: Vec<String>,
    pub word_starts: Vec<bool>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn push(&mut self, id: u32, surface: String, word_start: bool) {
        self.ids.push(id);
        self.surfaces.push(surface);
        self.word_starts.push(word_start);
    }

    /// Joining rule: concatenate surfaces, inserting a single space before
    /// every token that starts a new whitespace-delimited unit.
    pub fn reconstruct(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.surfaces.iter().enumerate() {
            if i > 0 && self.word_starts[i] {
                out.push(' ');
            }
            out.push_str(s);
        }
        out
    }
}

/// Special terms sorted for longest-match scanning: length descending, then
/// lexicographic for determinism.
pub(crate) fn order_specials(specials: &BTreeSet<String>) -> Vec<String> {
    let mut v: Vec<String> = specials.iter().cloned().collect();
    v.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    v
}

pub(crate) enum Seg<'a> {
    Special { term: &'a str, word_start: bool },
    Word { word: &'a str, word_start: bool },
}

fn starts_word(text: &str, byte_offset: usize) -> bool {
    byte_offset == 0 || text.as_bytes()[byte_offset - 1] == b' '
}

/// Longest-match left-to-right scan for special terms over normalized text;
/// the gaps in between are split into whitespace-delimited words.
pub(crate) fn segment<'a>(text: &'a str, specials_ordered: &'a [String]) -> Vec<Seg<'a>> {
    let mut segs = Vec::new();
    let flush_plain = |from: usize, to: usize, segs: &mut Vec<Seg<'a>>| {
        let span = &text[from..to];
        let mut offset = from;
        for piece in span.split(' ') {
            if !piece.is_empty() {
                segs.push(Seg::Word {
                    word: piece,
                    word_start: starts_word(text, offset),
                });
            }
            offset += piece.len() + 1;
        }
    };

    let mut i = 0;
    let mut plain_from = 0;
    while i < text.len() {
        let rest = &text[i..];
        let hit = specials_ordered.iter().find(|s| rest.starts_with(s.as_str()));
        if let Some(term) = hit {
            flush_plain(plain_from, i, &mut segs);
            segs.push(Seg::Special {
                term,
                word_start: starts_word(text, i),
            });
            i += term.len();
            plain_from = i;
        } else {
            // advance one char
            i += rest.chars().next().map(char::len_utf8).unwrap_or(1);
        }
    }
    flush_plain(plain_from, text.len(), &mut segs);
    segs
}

/// Word frequencies of the special-masked corpus, plus per-special
/// occurrence counts. Shared by all three trainers.
pub(crate) fn word_frequencies(
    corpus_texts: &[String],
    specials_ordered: &[String],
) -> (BTreeMap<String, u64>, BTreeMap<String, u64>) {
    let mut words: BTreeMap<String, u64> = BTreeMap::new();
    let mut special_counts: BTreeMap<String, u64> = BTreeMap::new();
    for text in corpus_texts {
        for seg in segment(text, specials_ordered) {
            match seg {
                Seg::Word { word, .. } => *words.entry(word.to_string()).or_insert(0) += 1,
                Seg::Special { term, .. } => {
                    *special_counts.entry(term.to_string()).or_insert(0) += 1
                }
            }
        }
    }
    (words, special_counts)
}

impl Vocabulary {
    /// Assembles a vocabulary and validates its invariants. Used by the
    /// trainers and by deserialization; direct construction is not exposed.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        kind: TokenizerKind,
        tokens: Vec<String>,
        special_terms: BTreeSet<String>,
        merges: Vec<(String, String)>,
        token_log_probs: Vec<f64>,
        unk_id: Option<u32>,
        byte_base: Option<u32>,
    ) -> Result<Vocabulary> {
        let mut token_to_id = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(Error::Invariant("empty token surface".into()));
            }
            if token_to_id.insert(t.clone(), i as u32).is_some() {
                return Err(Error::Invariant(alloc::format!(
                    "duplicate token surface {t:?}"
                )));
            }
        }
        for s in &special_terms {
            if !token_to_id.contains_key(s) {
                return Err(Error::Invariant(alloc::format!(
                    "special term {s:?} missing from token list"
                )));
            }
        }
        match kind {
            TokenizerKind::Word => {
                let unk = unk_id.ok_or_else(|| {
                    Error::Invariant("word vocabulary requires an UNK id".into())
                })?;
                if unk as usize >= tokens.len() {
                    return Err(Error::TokenOutOfRange {
                        id: unk,
                        vocab_size: tokens.len(),
                    });
                }
            }
            TokenizerKind::Bpe | TokenizerKind::Unigram => {
                let base = byte_base.ok_or_else(|| {
                    Error::Invariant("subword vocabulary requires a byte-token block".into())
                })? as usize;
                if base + 256 > tokens.len() {
                    return Err(Error::Invariant("byte-token block truncated".into()));
                }
                for b in 0..=255u8 {
                    if tokens[base + b as usize] != byte_surface(b) {
                        return Err(Error::Invariant("byte-token block malformed".into()));
                    }
                }
            }
        }
        if kind == TokenizerKind::Unigram {
            if token_log_probs.len() != tokens.len() {
                return Err(Error::Invariant(
                    "unigram log-probs must parallel the token list".into(),
                ));
            }
            for &lp in &token_log_probs {
                if !(lp.is_finite() && lp <= 0.0) {
                    return Err(Error::Invariant(
                        "unigram log-probs must be finite and non-positive".into(),
                    ));
                }
            }
        } else if !token_log_probs.is_empty() {
            return Err(Error::Invariant(
                "token log-probs are a unigram-only field".into(),
            ));
        }

        let mut pair_merge = BTreeMap::new();
        if kind == TokenizerKind::Bpe {
            for (rank, (a, b)) in merges.iter().enumerate() {
                let a_id = *token_to_id.get(a).ok_or_else(|| {
                    Error::Invariant(alloc::format!("merge input {a:?} not in vocabulary"))
                })?;
                let b_id = *token_to_id.get(b).ok_or_else(|| {
                    Error::Invariant(alloc::format!("merge input {b:?} not in vocabulary"))
                })?;
                let joined = alloc::format!("{a}{b}");
                let result = *token_to_id.get(&joined).ok_or_else(|| {
                    Error::Invariant(alloc::format!("merge result {joined:?} not in vocabulary"))
                })?;
                pair_merge
                    .entry((a_id, b_id))
                    .or_insert((rank as u32, result));
            }
        } else if !merges.is_empty() {
            return Err(Error::Invariant("merges are a BPE-only field".into()));
        }

        let specials_ordered = order_specials(&special_terms);
        let max_piece_chars = tokens
            .iter()
            .map(|t| t.chars().count())
            .max()
            .unwrap_or(1);

        Ok(Vocabulary {
            kind,
            tokens,
            token_to_id,
            special_terms,
            merges,
            token_log_probs,
            unk_id,
            byte_base,
            specials_ordered,
            pair_merge,
            max_piece_chars,
        })
    }

    pub fn kind(&self) -> TokenizerKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn surface(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, surface: &str) -> Option<u32> {
        self.token_to_id.get(surface).copied()
    }

    pub fn special_terms(&self) -> &BTreeSet<String> {
        &self.special_terms
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn token_log_probs(&self) -> &[f64] {
        &self.token_log_probs
    }

    pub fn unk_id(&self) -> Option<u32> {
        self.unk_id
    }

    pub fn byte_base(&self) -> Option<u32> {
        self.byte_base
    }

    /// Hash binding downstream artifacts (models, indexes) to this exact
    /// vocabulary; computed over canonical contents, not file bytes.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fingerprint::new();
        h.write_u8(match self.kind {
            TokenizerKind::Word => 0,
            TokenizerKind::Bpe => 1,
            TokenizerKind::Unigram => 2,
        });
        h.write_u64(self.tokens.len() as u64);
        for t in &self.tokens {
            h.write_str(t);
        }
        h.write_u64(self.special_terms.len() as u64);
        for s in &self.special_terms {
            h.write_str(s);
        }
        h.write_u64(self.merges.len() as u64);
        for (a, b) in &self.merges {
            h.write_str(a);
            h.write_str(b);
        }
        h.write_u64(self.token_log_probs.len() as u64);
        for &lp in &self.token_log_probs {
            h.write_f64(lp);
        }
        match self.unk_id {
            Some(id) => {
                h.write_u8(1);
                h.write_u32(id);
            }
            None => h.write_u8(0),
        }
        match self.byte_base {
            Some(id) => {
                h.write_u8(1);
                h.write_u32(id);
            }
            None => h.write_u8(0),
        }
        h.finish()
    }

    fn has_char(&self, ch: char) -> bool {
        let mut buf = [0u8; 4];
        self.token_to_id.contains_key(ch.encode_utf8(&mut buf))
    }

    fn byte_id(&self, b: u8) -> u32 {
        self.byte_base.expect("subword vocabulary") + u32::from(b)
    }

    fn log_prob_of(&self, surface: &str) -> Option<f64> {
        self.token_to_id
            .get(surface)
            .map(|&id| self.token_log_probs[id as usize])
    }
}

/// Train a word-level vocabulary: special terms plus the most frequent
/// whitespace-delimited words, under a total budget of `max_vocab` entries
/// (one of which is the reserved UNK token).
pub fn train_word(
    corpus_texts: &[String],
    max_vocab: usize,
    special_terms: &BTreeSet<String>,
) -> Result<Vocabulary> {
    word::train(corpus_texts, max_vocab, special_terms)
}

/// Train a BPE vocabulary of (at most) `vocab_size` entries: special terms,
/// the character alphabet, and greedy most-frequent-pair merges. Special
/// terms are pre-extracted from the corpus and never participate in merges.
pub fn train_bpe(
    corpus_texts: &[String],
    vocab_size: usize,
    special_terms: &BTreeSet<String>,
) -> Result<Vocabulary> {
    bpe::train(corpus_texts, vocab_size, special_terms)
}

/// Train a unigram vocabulary of (at most) `vocab_size` entries by seeding
/// with frequent substrings and iteratively pruning the pieces whose removal
/// least increases the corpus loss. Single characters and special terms are
/// never pruned.
pub fn train_unigram(
    corpus_texts: &[String],
    vocab_size: usize,
    special_terms: &BTreeSet<String>,
    params: &UnigramParams,
) -> Result<Vocabulary> {
    unigram::train(corpus_texts, vocab_size, special_terms, params)
}

/// Tokenize normalized text. Total: never fails.
pub fn tokenize(vocab: &Vocabulary, text: &str) -> TokenSequence {
    let mut seq = TokenSequence::default();
    for seg in segment(text, &vocab.specials_ordered) {
        match seg {
            Seg::Special { term, word_start } => {
                let id = vocab.id(term).expect("special terms are always in vocab");
                seq.push(id, term.to_string(), word_start);
            }
            Seg::Word { word, word_start } => push_word_tokens(vocab, word, word_start, &mut seq),
        }
    }
    seq
}

fn push_word_tokens(vocab: &Vocabulary, word: &str, word_start: bool, seq: &mut TokenSequence) {
    match vocab.kind {
        TokenizerKind::Word => {
            let id = vocab
                .id(word)
                .unwrap_or_else(|| vocab.unk_id.expect("word vocab has UNK"));
            seq.push(id, word.to_string(), word_start);
        }
        TokenizerKind::Bpe | TokenizerKind::Unigram => {
            // Split the word at characters outside the training alphabet;
            // those fall back to byte tokens.
            let mut first = true;
            let mut chunk = String::new();
            let flush =
                |chunk: &mut String, first: &mut bool, seq: &mut TokenSequence, vocab: &Vocabulary| {
                    if !chunk.is_empty() {
                        let ws = word_start && *first;
                        match vocab.kind {
                            TokenizerKind::Bpe => bpe::apply(vocab, chunk, ws, seq),
                            TokenizerKind::Unigram => unigram::apply(vocab, chunk, ws, seq),
                            TokenizerKind::Word => unreachable!(),
                        }
                        *first = false;
                        chunk.clear();
                    }
                };
            for ch in word.chars() {
                if vocab.has_char(ch) {
                    chunk.push(ch);
                } else {
                    flush(&mut chunk, &mut first, seq, vocab);
                    let mut buf = [0u8; 4];
                    let bytes = ch.encode_utf8(&mut buf).as_bytes();
                    for (k, &b) in bytes.iter().enumerate() {
                        let surface = if k == 0 { ch.to_string() } else { String::new() };
                        seq.push(vocab.byte_id(b), surface, word_start && first);
                        first = false;
                    }
                }
            }
            flush(&mut chunk, &mut first, seq, vocab);
        }
    }
}

/// Append the reserved byte-token block to a subword token list, returning
/// the block's base id.
pub(crate) fn append_byte_block(tokens: &mut Vec<String>) -> u32 {
    let base = tokens.len() as u32;
    for b in 0..=255u8 {
        tokens.push(byte_surface(b));
    }
    base
}

/// Maximum-logprob segmentation of `word` over pieces accepted by `lookup`,
/// ties broken toward fewer tokens, then leftmost-longest. Returns the piece
/// byte-ranges and the total log-probability, or `None` when no segmentation
/// covers the word.
pub(crate) fn viterbi_segment(
    word: &str,
    max_piece_chars: usize,
    lookup: &dyn Fn(&str) -> Option<f64>,
) -> Option<(Vec<(usize, usize)>, f64)> {
    // char boundaries, including the end
    let mut bounds: Vec<usize> = word.char_indices().map(|(i, _)| i).collect();
    bounds.push(word.len());
    let n = bounds.len() - 1;
    if n == 0 {
        return Some((Vec::new(), 0.0));
    }

    // dp[i]: best (score, piece_count, next_boundary) for the suffix starting
    // at char i. Built right-to-left so ties prefer the longest first piece.
    let mut dp: Vec<Option<(f64, u32, usize)>> = alloc::vec![None; n + 1];
    dp[n] = Some((0.0, 0, n));
    for i in (0..n).rev() {
        let mut best: Option<(f64, u32, usize)> = None;
        let hi = (i + max_piece_chars).min(n);
        for j in (i + 1)..=hi {
            let piece = &word[bounds[i]..bounds[j]];
            let (Some(lp), Some((s2, c2, _))) = (lookup(piece), dp[j]) else {
                continue;
            };
            let cand = (lp + s2, c2 + 1, j);
            let take = match best {
                None => true,
                Some((bs, bc, bj)) => {
                    cand.0 > bs || (cand.0 == bs && (cand.1 < bc || (cand.1 == bc && j > bj)))
                }
            };
            if take {
                best = Some(cand);
            }
        }
        dp[i] = best;
    }

    let (score, _, _) = dp[0]?;
    let mut ranges = Vec::new();
    let mut i = 0;
    while i < n {
        let (_, _, j) = dp[i].expect("reachable state on best path");
        ranges.push((bounds[i], bounds[j]));
        i = j;
    }
    Some((ranges, score))
}

#[cfg(test)]
mod tests;
