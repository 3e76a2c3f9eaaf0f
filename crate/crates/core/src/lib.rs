//! Hybrid lexical/semantic product retrieval, desk scale.
//!
//! The pipeline: a corpus of products, queries and graded relevance labels
//! is normalized and tokenized (word, BPE or unigram vocabularies, each with
//! an optional brand-augmented "mt" variant where multi-word terms are atomic
//! tokens). Per-token embedding tables are trained with a margin loss over
//! balanced positive/negative pairs. A term index maps every query-vocabulary
//! token to the products whose similarity with that token exceeds a threshold,
//! and retrieval unions the posting lists and ranks the candidates. Evaluation
//! reports P@k, R@k and mAP@k under a title-equivalence relation.
//!
//! This crate is `no_std` (with `alloc`) and holds the algorithmic core only.
//! File formats, dataset loading and the command-line driver live in the
//! companion `termsim` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod corpus;
pub mod encoder;
pub mod hash;
pub mod index;
pub mod metrics;
pub mod rng;
pub mod tokenizer;
pub mod trainer;

mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
