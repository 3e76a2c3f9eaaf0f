use alloc::string::String;

/// Errors surfaced by the retrieval core.
///
/// Variants are grouped by origin: corpus validation, tokenizer training,
/// encoder/scoring contracts, training setup and index construction. The
/// distinction matters to callers that map errors onto process exit codes.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("duplicate product_id {0}")]
    DuplicateProductId(u32),
    #[error("duplicate query_id {0}")]
    DuplicateQueryId(u32),
    #[error("duplicate label for query {query_id} and product {product_id}")]
    DuplicateLabel { query_id: u32, product_id: u32 },
    #[error("product {0} has an empty title after normalization")]
    EmptyTitle(u32),
    #[error("query {0} has empty text after normalization")]
    EmptyQueryText(u32),
    #[error("cannot class-balance training pairs: {exact} Exact vs {irrelevant} Irrelevant labels")]
    Unbalanceable { exact: usize, irrelevant: usize },

    #[error("tokenizer training corpus is empty")]
    EmptyCorpus,
    #[error("vocabulary budget {requested} is too small; need at least {minimum}")]
    VocabTooSmall { requested: usize, minimum: usize },

    #[error("token id {id} out of range for vocabulary of {vocab_size} tokens")]
    TokenOutOfRange { id: u32, vocab_size: usize },
    #[error("model was trained against a different vocabulary (fingerprint {expected:#018x}, got {actual:#018x})")]
    VocabFingerprintMismatch { expected: u64, actual: u64 },
    #[error("index was built against a different model (fingerprint {expected:#018x}, got {actual:#018x})")]
    ModelFingerprintMismatch { expected: u64, actual: u64 },
    #[error("pooled similarity is undefined for an empty token sequence")]
    EmptyEncoding,
    #[error("embedding dimensions differ: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    #[error("batch size {0} cannot provide in-batch negatives; need at least 2")]
    BatchTooSmall(usize),
    #[error("no training pairs supplied")]
    NoTrainingPairs,

    #[error("unknown product id {0}")]
    UnknownProduct(u32),
    #[error("unknown query id {0}")]
    UnknownQuery(u32),

    #[error("invariant violated: {0}")]
    Invariant(String),
}
