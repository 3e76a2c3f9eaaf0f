use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{order_specials, word_frequencies, TokenizerKind, Vocabulary, UNK_SURFACE};
use crate::{Error, Result};

pub(super) fn train(
    corpus_texts: &[String],
    max_vocab: usize,
    special_terms: &BTreeSet<String>,
) -> Result<Vocabulary> {
    if corpus_texts.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let minimum = special_terms.len() + 1;
    if max_vocab < minimum {
        return Err(Error::VocabTooSmall {
            requested: max_vocab,
            minimum,
        });
    }

    let specials_ordered = order_specials(special_terms);
    let (freqs, _) = word_frequencies(corpus_texts, &specials_ordered);

    let mut by_rank: Vec<(&String, u64)> = freqs.iter().map(|(w, &f)| (w, f)).collect();
    by_rank.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let mut tokens: Vec<String> = Vec::with_capacity(max_vocab);
    tokens.push(UNK_SURFACE.to_string());
    tokens.extend(special_terms.iter().cloned());
    let room = max_vocab - tokens.len();
    tokens.extend(by_rank.into_iter().take(room).map(|(w, _)| w.clone()));

    Vocabulary::from_parts(
        TokenizerKind::Word,
        tokens,
        special_terms.clone(),
        Vec::new(),
        Vec::new(),
        Some(0),
        None,
    )
}
