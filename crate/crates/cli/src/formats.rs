//! Versioned binary artifact files and the plain-text logs.
//!
//! Every binary artifact starts with an eight-byte magic string, a format
//! version, the build description, and the full canonical configuration
//! text, so any file identifies the run that produced it. Payloads are
//! little-endian and written through one buffer, making re-runs with the
//! same inputs byte-identical.

use std::collections::BTreeMap;
use std::path::Path;

use termsim_core::encoder::{EmbeddingModel, ModelVariant};
use termsim_core::index::{PostingEntry, TermIndex};
use termsim_core::tokenizer::{TokenizerKind, Vocabulary};

use crate::error::{CliError, Result};

const VOCAB_MAGIC: &[u8; 8] = b"TSVOCAB\0";
const MODEL_MAGIC: &[u8; 8] = b"TSMODEL\0";
const INDEX_MAGIC: &[u8; 8] = b"TSINDEX\0";
const FORMAT_VERSION: u32 = 1;

pub fn build_version() -> String {
    format!(
        "{} {}",
        env!("CARGO_PKG_VERSION"),
        env!("BUILD_GIT_DESCRIBE")
    )
}

/// Provenance block shared by all artifact files.
#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactMeta {
    pub build: String,
    pub config_text: String,
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new(magic: &[u8; 8], config_text: &str) -> Writer {
        let mut w = Writer { buf: Vec::new() };
        w.buf.extend_from_slice(magic);
        w.u32(FORMAT_VERSION);
        w.string(&build_version());
        w.string(config_text);
        w
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn string(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
    }

    fn finish(self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
            }
        }
        std::fs::write(path, &self.buf).map_err(|e| CliError::io(path, e))
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn open(buf: &'a [u8], path: &'a Path, magic: &[u8; 8], what: &str) -> Result<Reader<'a>> {
        let mut r = Reader { buf, pos: 0, path };
        let found = r.bytes(8)?;
        if found != magic {
            return Err(CliError::Data(format!(
                "{}: not a {what} file (bad magic)",
                path.display()
            )));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(CliError::Data(format!(
                "{}: unsupported {what} format version {version}",
                path.display()
            )));
        }
        Ok(r)
    }

    fn truncated(&self) -> CliError {
        CliError::Data(format!("{}: truncated file", self.path.display()))
    }

    fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(self.truncated());
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    /// Element count for a variable-length block; every element occupies at
    /// least one byte, so counts beyond the file size mean corruption and
    /// fail before any allocation.
    fn len(&mut self) -> Result<usize> {
        let n = self.u64()?;
        if n > self.buf.len() as u64 {
            return Err(self.truncated());
        }
        usize::try_from(n).map_err(|_| self.truncated())
    }

    fn string(&mut self) -> Result<String> {
        let n = self.len()?;
        let raw = self.bytes(n)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| CliError::Data(format!("{}: invalid utf-8", self.path.display())))
    }

    fn meta(&mut self) -> Result<ArtifactMeta> {
        Ok(ArtifactMeta {
            build: self.string()?,
            config_text: self.string()?,
        })
    }

    fn done(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(CliError::Data(format!(
                "{}: {} trailing bytes",
                self.path.display(),
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn kind_tag(kind: TokenizerKind) -> u8 {
    match kind {
        TokenizerKind::Word => 0,
        TokenizerKind::Bpe => 1,
        TokenizerKind::Unigram => 2,
    }
}

fn variant_tag(v: ModelVariant) -> u8 {
    match v {
        ModelVariant::H1 => 0,
        ModelVariant::De => 1,
        ModelVariant::Se => 2,
    }
}

pub fn write_vocab(path: &Path, vocab: &Vocabulary, config_text: &str) -> Result<()> {
    let mut w = Writer::new(VOCAB_MAGIC, config_text);
    w.u8(kind_tag(vocab.kind()));
    w.u64(vocab.len() as u64);
    for t in vocab.tokens() {
        w.string(t);
    }
    w.u64(vocab.special_terms().len() as u64);
    for s in vocab.special_terms() {
        w.string(s);
    }
    w.u64(vocab.merges().len() as u64);
    for (a, b) in vocab.merges() {
        w.string(a);
        w.string(b);
    }
    w.u64(vocab.token_log_probs().len() as u64);
    for &p in vocab.token_log_probs() {
        w.f64(p);
    }
    match vocab.unk_id() {
        Some(id) => {
            w.u8(1);
            w.u32(id);
        }
        None => w.u8(0),
    }
    match vocab.byte_base() {
        Some(id) => {
            w.u8(1);
            w.u32(id);
        }
        None => w.u8(0),
    }
    w.finish(path)
}

pub fn read_vocab(path: &Path) -> Result<(Vocabulary, ArtifactMeta)> {
    let buf = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let mut r = Reader::open(&buf, path, VOCAB_MAGIC, "vocabulary")?;
    let meta = r.meta()?;
    let kind = match r.u8()? {
        0 => TokenizerKind::Word,
        1 => TokenizerKind::Bpe,
        2 => TokenizerKind::Unigram,
        other => {
            return Err(CliError::Data(format!(
                "{}: unknown tokenizer kind tag {other}",
                path.display()
            )))
        }
    };
    let n = r.len()?;
    let mut tokens = Vec::with_capacity(n);
    for _ in 0..n {
        tokens.push(r.string()?);
    }
    let n = r.len()?;
    let mut specials = std::collections::BTreeSet::new();
    for _ in 0..n {
        specials.insert(r.string()?);
    }
    let n = r.len()?;
    let mut merges = Vec::with_capacity(n);
    for _ in 0..n {
        let a = r.string()?;
        let b = r.string()?;
        merges.push((a, b));
    }
    let n = r.len()?;
    let mut log_probs = Vec::with_capacity(n);
    for _ in 0..n {
        log_probs.push(r.f64()?);
    }
    let unk_id = if r.u8()? == 1 { Some(r.u32()?) } else { None };
    let byte_base = if r.u8()? == 1 { Some(r.u32()?) } else { None };
    r.done()?;
    let vocab = Vocabulary::from_parts(kind, tokens, specials, merges, log_probs, unk_id, byte_base)?;
    Ok((vocab, meta))
}

pub fn write_model(path: &Path, model: &EmbeddingModel, config_text: &str) -> Result<()> {
    let mut w = Writer::new(MODEL_MAGIC, config_text);
    w.u8(variant_tag(model.variant()));
    w.u64(model.dim() as u64);
    w.u64(model.n_tokens() as u64);
    w.u64(model.vocab_fingerprint());
    w.u64(model.init_seed());
    let slots = model.slots();
    w.u8(slots.len() as u8);
    for &slot in slots {
        for &v in model.table(slot) {
            w.f64(v);
        }
    }
    w.finish(path)
}

pub fn read_model(path: &Path) -> Result<(EmbeddingModel, ArtifactMeta)> {
    let buf = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let mut r = Reader::open(&buf, path, MODEL_MAGIC, "model")?;
    let meta = r.meta()?;
    let variant = match r.u8()? {
        0 => ModelVariant::H1,
        1 => ModelVariant::De,
        2 => ModelVariant::Se,
        other => {
            return Err(CliError::Data(format!(
                "{}: unknown model variant tag {other}",
                path.display()
            )))
        }
    };
    let dim = r.u64()? as usize;
    let n_tokens = r.u64()? as usize;
    let vocab_fingerprint = r.u64()?;
    let init_seed = r.u64()?;
    let n_tables = r.u8()?;
    let expect = match variant {
        ModelVariant::Se => 1,
        ModelVariant::H1 | ModelVariant::De => 2,
    };
    if n_tables != expect {
        return Err(CliError::Data(format!(
            "{}: {n_tables} tables stored, variant needs {expect}",
            path.display()
        )));
    }
    let cells = n_tokens
        .checked_mul(dim)
        .ok_or_else(|| r.truncated())?;
    let read_table = |r: &mut Reader| -> Result<Vec<f64>> {
        let mut t = Vec::with_capacity(cells);
        for _ in 0..cells {
            t.push(r.f64()?);
        }
        Ok(t)
    };
    let query_table = read_table(&mut r)?;
    let product_table = if expect == 2 {
        Some(read_table(&mut r)?)
    } else {
        None
    };
    r.done()?;
    let model = EmbeddingModel::from_parts(
        variant,
        dim,
        n_tokens,
        vocab_fingerprint,
        init_seed,
        query_table,
        product_table,
    )?;
    Ok((model, meta))
}

pub fn write_index(path: &Path, index: &TermIndex, config_text: &str) -> Result<()> {
    let mut w = Writer::new(INDEX_MAGIC, config_text);
    w.f64(index.gamma());
    w.u64(index.vocab_fingerprint());
    w.u64(index.model_fingerprint());
    w.u64(index.product_count() as u64);
    w.u64(index.postings().len() as u64);
    for (&token, list) in index.postings() {
        w.u32(token);
        w.u32(list.len() as u32);
        for e in list {
            w.u32(e.product_id);
            w.f32(e.score);
        }
    }
    w.finish(path)
}

pub fn read_index(path: &Path) -> Result<(TermIndex, ArtifactMeta)> {
    let buf = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let mut r = Reader::open(&buf, path, INDEX_MAGIC, "index")?;
    let meta = r.meta()?;
    let gamma = r.f64()?;
    let vocab_fingerprint = r.u64()?;
    let model_fingerprint = r.u64()?;
    let product_count = r.u64()? as usize;
    let n_terms = r.len()?;
    let mut postings = BTreeMap::new();
    for _ in 0..n_terms {
        let token = r.u32()?;
        let len = r.u32()? as usize;
        let mut list = Vec::with_capacity(len);
        for _ in 0..len {
            let product_id = r.u32()?;
            let score = r.f32()?;
            list.push(PostingEntry { product_id, score });
        }
        if postings.insert(token, list).is_some() {
            return Err(CliError::Data(format!(
                "{}: duplicate posting list for token {token}",
                path.display()
            )));
        }
    }
    r.done()?;
    let index = TermIndex::from_parts(
        gamma,
        postings,
        vocab_fingerprint,
        model_fingerprint,
        product_count,
    )?;
    Ok((index, meta))
}
