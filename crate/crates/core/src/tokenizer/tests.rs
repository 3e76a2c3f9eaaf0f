use super::*;
use alloc::string::ToString;
use alloc::vec;

fn texts(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn specials(list: &[&str]) -> BTreeSet<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn surfaces(vocab: &Vocabulary, text: &str) -> Vec<String> {
    tokenize(vocab, text).surfaces
}

mod word_kind {
    use super::*;

    #[test]
    fn keeps_most_frequent_words_and_unk() {
        let vocab = train_word(&texts(&["red chair", "red table"]), 10, &BTreeSet::new()).unwrap();
        for t in ["red", "chair", "table", UNK_SURFACE] {
            assert!(vocab.id(t).is_some(), "missing {t}");
        }
        assert_eq!(vocab.len(), 4);
        assert_eq!(vocab.unk_id(), Some(0));
    }

    #[test]
    fn budget_prefers_frequency_then_lexicographic() {
        let corpus = texts(&["b b b", "a a", "c c", "d"]);
        let vocab = train_word(&corpus, 3, &BTreeSet::new()).unwrap();
        // room for two words after UNK: b (freq 3), then a (freq 2, ties
        // with c broken lexicographically)
        assert_eq!(vocab.len(), 3);
        assert!(vocab.id("b").is_some());
        assert!(vocab.id("a").is_some());
        assert!(vocab.id("c").is_none());
    }

    #[test]
    fn out_of_vocabulary_words_keep_their_surface() {
        let vocab = train_word(&texts(&["red chair"]), 8, &BTreeSet::new()).unwrap();
        let seq = tokenize(&vocab, "red sofa");
        assert_eq!(seq.ids[0], vocab.id("red").unwrap());
        assert_eq!(seq.ids[1], vocab.unk_id().unwrap());
        assert_eq!(seq.surfaces, vec!["red".to_string(), "sofa".to_string()]);
        assert_eq!(seq.reconstruct(), "red sofa");
    }

    #[test]
    fn budget_below_specials_plus_unk_is_fatal() {
        let err = train_word(&texts(&["x"]), 2, &specials(&["a b", "c d"])).unwrap_err();
        assert!(matches!(err, Error::VocabTooSmall { minimum: 3, .. }));
        assert!(train_word(&[], 5, &BTreeSet::new()).is_err());
    }
}

mod special_terms {
    use super::*;

    #[test]
    fn brand_is_atomic_in_all_kinds() {
        let corpus = texts(&["new balance shoes", "running shoes", "new balance gear"]);
        let sp = specials(&["new balance"]);
        let word = train_word(&corpus, 16, &sp).unwrap();
        let bpe = train_bpe(&corpus, 40, &sp).unwrap();
        let uni = train_unigram(&corpus, 30, &sp, &UnigramParams::default()).unwrap();
        for vocab in [&word, &bpe, &uni] {
            let seq = tokenize(vocab, "new balance shoes");
            assert_eq!(seq.surfaces[0], "new balance");
            assert_eq!(seq.reconstruct(), "new balance shoes");
            assert_eq!(surfaces(vocab, "new balance"), vec!["new balance".to_string()]);
        }
        // non-mt word tokenizer splits on whitespace
        let plain = train_word(&corpus, 16, &BTreeSet::new()).unwrap();
        assert_eq!(
            surfaces(&plain, "new balance shoes"),
            vec!["new".to_string(), "balance".to_string(), "shoes".to_string()]
        );
    }

    #[test]
    fn longest_match_wins() {
        let corpus = texts(&["new balance shoes", "new shoes"]);
        let sp = specials(&["new", "new balance"]);
        let vocab = train_word(&corpus, 16, &sp).unwrap();
        assert_eq!(
            surfaces(&vocab, "new balance shoes"),
            vec!["new balance".to_string(), "shoes".to_string()]
        );
        assert_eq!(
            surfaces(&vocab, "new shoes"),
            vec!["new".to_string(), "shoes".to_string()]
        );
    }

    #[test]
    fn scan_is_left_to_right() {
        let corpus = texts(&["ab c d"]);
        let sp = specials(&["ab", "b c"]);
        let vocab = train_word(&corpus, 16, &sp).unwrap();
        assert_eq!(
            surfaces(&vocab, "ab c d"),
            vec!["ab".to_string(), "c".to_string(), "d".to_string()]
        );
    }

    #[test]
    fn matches_inside_words_preserve_reconstruction() {
        let corpus = texts(&["xnew balancey plain"]);
        let sp = specials(&["new balance"]);
        let vocab = train_word(&corpus, 16, &sp).unwrap();
        let seq = tokenize(&vocab, "xnew balancey plain");
        assert_eq!(
            seq.surfaces,
            vec![
                "x".to_string(),
                "new balance".to_string(),
                "y".to_string(),
                "plain".to_string()
            ]
        );
        assert_eq!(seq.word_starts, vec![true, false, false, true]);
        assert_eq!(seq.reconstruct(), "xnew balancey plain");
    }

    #[test]
    fn masked_occurrences_leave_no_trace_in_statistics() {
        // with "new balance" masked, neither "new" nor "balance" is a word
        let corpus = texts(&["new balance", "new balance", "other"]);
        let sp = specials(&["new balance"]);
        let vocab = train_word(&corpus, 16, &sp).unwrap();
        assert!(vocab.id("new").is_none());
        assert!(vocab.id("balance").is_none());
    }
}

mod bpe_kind {
    use super::*;

    #[test]
    fn first_merge_follows_pair_counts() {
        let vocab = train_bpe(&texts(&["aaab", "aaab", "ab"]), 6, &BTreeSet::new()).unwrap();
        // pair (a,a) occurs 4 times, (a,b) 3 times
        assert_eq!(vocab.merges()[0], ("a".to_string(), "a".to_string()));
        for t in ["a", "b", "aa"] {
            assert!(vocab.id(t).is_some(), "missing {t}");
        }
    }

    #[test]
    fn alphabet_sized_budget_means_zero_merges() {
        let vocab = train_bpe(&texts(&["abc cba"]), 3, &BTreeSet::new()).unwrap();
        assert!(vocab.merges().is_empty());
        assert_eq!(
            surfaces(&vocab, "cab"),
            vec!["c".to_string(), "a".to_string(), "b".to_string()]
        );
        assert!(train_bpe(&texts(&["abc"]), 2, &BTreeSet::new()).is_err());
    }

    #[test]
    fn specials_are_masked_out_of_merge_statistics() {
        // "xy" dominates pair counts unless its occurrences inside the
        // special term are masked
        let corpus = texts(&["xy ab", "xy ab", "xy ab"]);
        let masked = train_bpe(&corpus, 8, &specials(&["xy"])).unwrap();
        assert!(masked.merges().iter().all(|m| m != &("x".to_string(), "y".to_string())));
        let unmasked = train_bpe(&corpus, 8, &BTreeSet::new()).unwrap();
        assert!(unmasked.merges().contains(&("x".to_string(), "y".to_string())));
    }

    #[test]
    fn unknown_characters_fall_back_to_bytes() {
        let vocab = train_bpe(&texts(&["ab ab"]), 8, &BTreeSet::new()).unwrap();
        let seq = tokenize(&vocab, "aéb");
        let base = vocab.byte_base().unwrap();
        // é is 0xC3 0xA9 in UTF-8
        assert_eq!(seq.ids[1], base + 0xC3);
        assert_eq!(seq.ids[2], base + 0xA9);
        assert_eq!(seq.reconstruct(), "aéb");
    }

    /// From-scratch reference: recount every pair at every step.
    fn brute_force_merges(
        corpus: &[String],
        vocab_size: usize,
        sp: &BTreeSet<String>,
    ) -> Vec<(String, String)> {
        let ordered = order_specials(sp);
        let (freqs, _) = word_frequencies(corpus, &ordered);
        let mut words: Vec<(Vec<String>, u64)> = freqs
            .iter()
            .map(|(w, &f)| (w.chars().map(|c| c.to_string()).collect(), f))
            .collect();
        let alphabet: BTreeSet<String> =
            words.iter().flat_map(|(w, _)| w.iter().cloned()).collect();
        let mut n_tokens = sp.len() + alphabet.len();
        let mut vocab: BTreeSet<String> = alphabet.clone();
        let mut merges = Vec::new();
        while n_tokens < vocab_size {
            let mut counts: BTreeMap<(String, String), u64> = BTreeMap::new();
            for (w, f) in &words {
                for pair in w.windows(2) {
                    *counts.entry((pair[0].clone(), pair[1].clone())).or_insert(0) += f;
                }
            }
            let Some(best) = counts
                .iter()
                .map(|(p, &c)| (c, p.clone()))
                .max_by(|a, b| a.0.cmp(&b.0).then_with(|| b.1.cmp(&a.1)))
            else {
                break;
            };
            let (a, b) = best.1;
            let joined = alloc::format!("{a}{b}");
            for (w, _) in &mut words {
                let mut out = Vec::with_capacity(w.len());
                let mut i = 0;
                while i < w.len() {
                    if i + 1 < w.len() && w[i] == a && w[i + 1] == b {
                        out.push(joined.clone());
                        i += 2;
                    } else {
                        out.push(w[i].clone());
                        i += 1;
                    }
                }
                *w = out;
            }
            if vocab.insert(joined) {
                n_tokens += 1;
            }
            merges.push((a, b));
        }
        merges
    }

    #[test]
    fn trained_merges_match_brute_force_recomputation() {
        let cases: Vec<(Vec<String>, usize, BTreeSet<String>)> = vec![
            (texts(&["aaab", "aaab", "ab"]), 8, BTreeSet::new()),
            (texts(&["low lower lowest", "low low slow"]), 16, BTreeSet::new()),
            (texts(&["abab baba abba", "aabb bbaa abab"]), 12, BTreeSet::new()),
            (texts(&["new balance run", "new balance gear", "run gear"]), 20, specials(&["new balance"])),
        ];
        for (corpus, size, sp) in &cases {
            let total: usize = corpus.iter().map(String::len).sum();
            assert!(total <= 100);
            let vocab = train_bpe(corpus, *size, sp).unwrap();
            assert_eq!(vocab.merges(), brute_force_merges(corpus, *size, sp).as_slice());
        }
    }

    #[test]
    fn seeded_random_corpus_matches_brute_force() {
        let mut rng = crate::rng::Stream::seed(1234);
        for _ in 0..8 {
            let mut body = String::new();
            for _ in 0..90 {
                let c = [b'a', b'b', b'c', b' '][rng.index(4)];
                body.push(c as char);
            }
            let corpus = vec![crate::corpus::normalize_text(&body)];
            if corpus[0].is_empty() {
                continue;
            }
            let vocab = train_bpe(&corpus, 10, &BTreeSet::new()).unwrap();
            assert_eq!(
                vocab.merges(),
                brute_force_merges(&corpus, 10, &BTreeSet::new()).as_slice()
            );
        }
    }

    #[test]
    fn applying_merges_in_order_reproduces_training_segmentation() {
        let corpus = texts(&["low lower lowest", "low low slow", "west vest"]);
        let vocab = train_bpe(&corpus, 14, &BTreeSet::new()).unwrap();
        let ordered = order_specials(vocab.special_terms());
        let (freqs, _) = word_frequencies(&corpus, &ordered);
        for word in freqs.keys() {
            // reference: replay the merge list in training order
            let mut pieces: Vec<String> = word.chars().map(|c| c.to_string()).collect();
            for (a, b) in vocab.merges() {
                let joined = alloc::format!("{a}{b}");
                let mut out = Vec::with_capacity(pieces.len());
                let mut i = 0;
                while i < pieces.len() {
                    if i + 1 < pieces.len() && &pieces[i] == a && &pieces[i + 1] == b {
                        out.push(joined.clone());
                        i += 2;
                    } else {
                        out.push(pieces[i].clone());
                        i += 1;
                    }
                }
                pieces = out;
            }
            assert_eq!(surfaces(&vocab, word), pieces, "word {word:?}");
        }
    }
}

mod unigram_kind {
    use super::*;

    fn short_params() -> UnigramParams {
        UnigramParams {
            max_piece_len: 2,
            ..UnigramParams::default()
        }
    }

    #[test]
    fn useful_bigram_survives_pruning_and_wins_viterbi() {
        let corpus = texts(&["abab abab abab", "abab"]);
        let vocab = train_unigram(&corpus, 3, &BTreeSet::new(), &short_params()).unwrap();
        let ab = vocab.id("ab").expect("bigram kept");
        let a = vocab.id("a").unwrap();
        let b = vocab.id("b").unwrap();
        let lp = vocab.token_log_probs();
        // one "ab" beats "a" then "b"
        assert!(lp[ab as usize] > lp[a as usize] + lp[b as usize]);
        let seq = tokenize(&vocab, "abab");
        assert_eq!(seq.ids, vec![ab, ab]);
    }

    #[test]
    fn pruned_to_alphabet_segments_by_characters() {
        let corpus = texts(&["abc abc cab"]);
        let vocab = train_unigram(&corpus, 3, &BTreeSet::new(), &UnigramParams::default()).unwrap();
        assert_eq!(
            surfaces(&vocab, "cab"),
            vec!["c".to_string(), "a".to_string(), "b".to_string()]
        );
        assert!(train_unigram(&corpus, 2, &BTreeSet::new(), &UnigramParams::default()).is_err());
    }

    #[test]
    fn specials_survive_and_log_probs_are_valid() {
        let corpus = texts(&["new balance run", "run fast"]);
        let sp = specials(&["new balance"]);
        let vocab = train_unigram(&corpus, 12, &sp, &UnigramParams::default()).unwrap();
        assert!(vocab.id("new balance").is_some());
        assert_eq!(vocab.token_log_probs().len(), vocab.len());
        assert!(vocab
            .token_log_probs()
            .iter()
            .all(|&lp| lp.is_finite() && lp <= 0.0));
        assert_eq!(surfaces(&vocab, "new balance"), vec!["new balance".to_string()]);
    }

    #[test]
    fn unknown_characters_fall_back_to_bytes() {
        let corpus = texts(&["abc"]);
        let vocab = train_unigram(&corpus, 6, &BTreeSet::new(), &UnigramParams::default()).unwrap();
        let seq = tokenize(&vocab, "axc");
        assert_eq!(seq.ids[1], vocab.byte_base().unwrap() + u32::from(b'x'));
        assert_eq!(seq.reconstruct(), "axc");
    }

    /// All 2^(chars-1) segmentations, scored with the same right-to-left
    /// summation as the dynamic program.
    fn enumerate_best(word: &str, vocab: &Vocabulary) -> Option<(Vec<String>, f64, u32)> {
        let chars: Vec<char> = word.chars().collect();
        let n = chars.len();
        let mut best: Option<(Vec<String>, f64, u32)> = None;
        for mask in 0..(1u32 << (n - 1)) {
            let mut pieces: Vec<String> = Vec::new();
            let mut cur = String::new();
            for (i, &c) in chars.iter().enumerate() {
                cur.push(c);
                if i == n - 1 || mask & (1 << i) != 0 {
                    pieces.push(core::mem::take(&mut cur));
                }
            }
            let mut score = 0.0;
            let mut ok = true;
            for p in pieces.iter().rev() {
                match vocab.id(p) {
                    Some(id) => score = vocab.token_log_probs()[id as usize] + score,
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            let count = pieces.len() as u32;
            let better = match &best {
                None => true,
                Some((bp, bs, bc)) => {
                    score > *bs
                        || (score == *bs
                            && (count < *bc
                                || (count == *bc
                                    && pieces.iter().map(String::len).gt(bp.iter().map(String::len)))))
                }
            };
            if better {
                best = Some((pieces, score, count));
            }
        }
        best
    }

    #[test]
    fn viterbi_equals_exhaustive_enumeration() {
        let corpus = texts(&[
            "abab banana cabbage",
            "baba nanab ana",
            "cab cabba bag gag",
        ]);
        let vocab = train_unigram(&corpus, 14, &BTreeSet::new(), &UnigramParams::default()).unwrap();
        let words = [
            "abab", "banana", "cabbage", "ana", "nab", "bag", "gag", "aa", "abcabca", "bbbbbbbb",
        ];
        for word in words {
            assert!(word.chars().count() <= 8);
            let got = tokenize(&vocab, word);
            let lookup = |p: &str| vocab.id(p).map(|id| vocab.token_log_probs()[id as usize]);
            let (_, got_score) =
                viterbi_segment(word, vocab.tokens().iter().map(|t| t.chars().count()).max().unwrap(), &lookup)
                    .unwrap();
            let (want_pieces, want_score, _) = enumerate_best(word, &vocab).expect("chars cover");
            assert_eq!(got_score, want_score, "word {word:?}");
            assert_eq!(got.surfaces, want_pieces, "word {word:?}");
        }
    }
}

mod unified {
    use super::*;

    fn all_vocabs(corpus: &[String], sp: &BTreeSet<String>) -> Vec<Vocabulary> {
        vec![
            train_word(corpus, 32, sp).unwrap(),
            train_bpe(corpus, 48, sp).unwrap(),
            train_unigram(corpus, 40, sp, &UnigramParams::default()).unwrap(),
        ]
    }

    #[test]
    fn empty_text_yields_empty_sequence() {
        for vocab in all_vocabs(&texts(&["some corpus text"]), &BTreeSet::new()) {
            assert!(tokenize(&vocab, "").is_empty());
        }
    }

    #[test]
    fn reconstruction_round_trips() {
        let corpus = texts(&["red oak chair", "blue pine table", "new balance shoes"]);
        let sp = specials(&["new balance"]);
        let samples = [
            "red oak chair",
            "blue chair",
            "new balance shoes",
            "totally unseen words über way",
            "anew balanced",
            "a",
        ];
        for vocab in all_vocabs(&corpus, &sp) {
            for s in samples {
                let seq = tokenize(&vocab, s);
                assert_eq!(seq.reconstruct(), s, "kind {:?}", vocab.kind());
                assert_eq!(seq.ids.len(), seq.surfaces.len());
                assert_eq!(seq.ids.len(), seq.word_starts.len());
            }
        }
    }

    #[test]
    fn training_is_deterministic() {
        let corpus = texts(&["alpha beta gamma", "beta gamma delta", "gamma delta alpha"]);
        let sp = specials(&["beta gamma"]);
        for (a, b) in all_vocabs(&corpus, &sp).into_iter().zip(all_vocabs(&corpus, &sp)) {
            assert_eq!(a, b);
            assert_eq!(a.fingerprint(), b.fingerprint());
        }
    }

    #[test]
    fn fingerprint_tracks_contents() {
        let corpus = texts(&["alpha beta gamma", "beta gamma delta"]);
        // Budget 4 keeps three words under the UNK slot, budget 5 keeps all
        // four, so the token lists genuinely differ.
        let v1 = train_word(&corpus, 5, &BTreeSet::new()).unwrap();
        let v2 = train_word(&corpus, 4, &BTreeSet::new()).unwrap();
        assert_ne!(v1.fingerprint(), v2.fingerprint());
        assert_eq!(v1.len(), 5);
        assert_eq!(v2.len(), 4);
    }

    #[test]
    fn ids_are_dense_and_stable_through_parts() {
        let corpus = texts(&["aa bb cc", "bb cc dd"]);
        for vocab in all_vocabs(&corpus, &specials(&["aa"])) {
            for (i, t) in vocab.tokens().iter().enumerate() {
                assert_eq!(vocab.id(t), Some(i as u32));
            }
            let rebuilt = Vocabulary::from_parts(
                vocab.kind(),
                vocab.tokens().to_vec(),
                vocab.special_terms().clone(),
                vocab.merges().to_vec(),
                vocab.token_log_probs().to_vec(),
                vocab.unk_id(),
                vocab.byte_base(),
            )
            .unwrap();
            assert_eq!(rebuilt, vocab);
            assert_eq!(rebuilt.fingerprint(), vocab.fingerprint());
        }
    }
}
