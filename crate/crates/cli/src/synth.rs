//! Deterministic generator for a WANDS-shaped furniture catalog: products
//! with capitalized two-word brands and a small repeated-title fraction,
//! queries derived from actual products (so every query has at least one
//! exact match), and graded labels in the requested exact total.
//!
//! The word inventory is deliberately small and overlapping: brand halves
//! double as ordinary style and pattern words, so splitting a brand into its
//! parts genuinely costs retrieval precision.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use termsim_core::rng::Stream;

use crate::error::{CliError, Result};

const TYPES: [&str; 24] = [
    "chair", "table", "lamp", "rug", "sofa", "desk", "shelf", "bed", "stool", "bench", "dresser",
    "mirror", "cabinet", "ottoman", "bookcase", "nightstand", "wardrobe", "recliner", "loveseat",
    "futon", "vanity", "headboard", "daybed", "sectional",
];

const MATERIALS: [&str; 18] = [
    "oak", "walnut", "pine", "maple", "teak", "bamboo", "rattan", "wicker", "velvet", "linen",
    "leather", "wool", "brass", "copper", "steel", "marble", "glass", "ceramic",
];

const COLORS: [&str; 14] = [
    "red", "blue", "green", "ivory", "charcoal", "beige", "navy", "olive", "amber", "slate",
    "pearl", "crimson", "teal", "sand",
];

const STYLES: [&str; 16] = [
    "modern", "rustic", "vintage", "industrial", "coastal", "farmhouse", "royal", "golden",
    "classic", "compact", "foldable", "adjustable", "tufted", "weathered", "silver", "northern",
];

const PATTERNS: [&str; 10] = [
    "fern", "harbor", "valley", "crest", "barn", "loft", "mill", "grove", "peak", "summit",
];

const FILLER: [&str; 20] = [
    "with", "a", "finish", "for", "the", "living", "room", "solid", "frame", "design", "and",
    "storage", "space", "easy", "assembly", "inspired", "accents", "sturdy", "legs", "upholstery",
];

/// Brand halves reuse style, color, material and pattern words, mirroring
/// brands like "new balance" whose parts are common words.
const BRANDS: [(&str, &str); 18] = [
    ("royal", "oak"),
    ("golden", "fern"),
    ("silver", "harbor"),
    ("iron", "valley"),
    ("cedar", "crest"),
    ("blue", "barn"),
    ("amber", "loft"),
    ("coastal", "mill"),
    ("summer", "grove"),
    ("northern", "peak"),
    ("royal", "fern"),
    ("golden", "harbor"),
    ("silver", "valley"),
    ("iron", "crest"),
    ("cedar", "barn"),
    ("blue", "loft"),
    ("amber", "mill"),
    ("coastal", "grove"),
];

const PRODUCT_LABEL: u64 = 0x70726f64; // "prod"
const QUERY_LABEL: u64 = 0x71757279; // "qury"
const LABEL_LABEL: u64 = 0x6c61626c; // "labl"

const DUPLICATE_TITLE_RATE: f64 = 0.02;
const BRAND_RATE: f64 = 0.35;

#[derive(Debug, Clone, Copy)]
pub struct SynthSpec {
    pub products: usize,
    pub queries: usize,
    pub labels: usize,
    pub seed: u64,
}

impl SynthSpec {
    /// The shape of the full WANDS release.
    pub fn full_scale(seed: u64) -> SynthSpec {
        SynthSpec {
            products: 42_994,
            queries: 480,
            labels: 233_448,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthPaths {
    pub products: PathBuf,
    pub queries: PathBuf,
    pub labels: PathBuf,
    pub brands: PathBuf,
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

/// Distinct lowercase words that can appear in titles, in a fixed order;
/// their positions provide the bitmask vocabulary for label classification.
fn title_word_ids() -> Vec<&'static str> {
    let mut seen = BTreeSet::new();
    let mut words = Vec::new();
    for w in TYPES
        .iter()
        .chain(&MATERIALS)
        .chain(&COLORS)
        .chain(&STYLES)
        .chain(&PATTERNS)
        .chain(BRANDS.iter().flat_map(|(a, b)| [a, b]))
    {
        if seen.insert(*w) {
            words.push(*w);
        }
    }
    assert!(words.len() <= 128, "title vocabulary exceeds the u128 mask");
    words
}

fn mask_of(words: &[&str], ids: &[&'static str]) -> u128 {
    let mut m = 0u128;
    for w in words {
        if let Some(i) = ids.iter().position(|x| x == w) {
            m |= 1 << i;
        }
    }
    m
}

struct GenProduct {
    title_raw: String,
    description: String,
    type_word: &'static str,
    title_mask: u128,
    type_bit: u128,
}

fn gen_products(spec: &SynthSpec, ids: &[&'static str]) -> Vec<GenProduct> {
    let mut rng = Stream::substream(spec.seed, PRODUCT_LABEL);
    let mut out: Vec<GenProduct> = Vec::with_capacity(spec.products);
    for i in 0..spec.products {
        if i > 0 && rng.unit_f64() < DUPLICATE_TITLE_RATE {
            let source = rng.index(i);
            let twin = &out[source];
            let (title_raw, type_word, title_mask, type_bit) = (
                twin.title_raw.clone(),
                twin.type_word,
                twin.title_mask,
                twin.type_bit,
            );
            let description = gen_description(&mut rng, type_word);
            out.push(GenProduct {
                title_raw,
                description,
                type_word,
                title_mask,
                type_bit,
            });
            continue;
        }

        let type_word = TYPES[rng.index(TYPES.len())];
        let mut words: Vec<String> = Vec::new();
        if rng.unit_f64() < BRAND_RATE {
            let (a, b) = BRANDS[rng.index(BRANDS.len())];
            words.push(capitalize(a));
            words.push(capitalize(b));
        }
        if rng.unit_f64() < 0.55 {
            words.push(STYLES[rng.index(STYLES.len())].to_string());
        }
        if rng.unit_f64() < 0.6 {
            words.push(COLORS[rng.index(COLORS.len())].to_string());
        }
        if rng.unit_f64() < 0.75 {
            words.push(MATERIALS[rng.index(MATERIALS.len())].to_string());
        }
        words.push(type_word.to_string());
        if rng.unit_f64() < 0.25 {
            words.push(format!("with {} pattern", PATTERNS[rng.index(PATTERNS.len())]));
        }

        let title_raw = words.join(" ");
        let lower = title_raw.to_lowercase();
        let title_words: Vec<&str> = lower.split(' ').collect();
        let title_mask = mask_of(&title_words, ids);
        let type_bit = mask_of(&[type_word], ids);
        let description = gen_description(&mut rng, type_word);
        out.push(GenProduct {
            title_raw,
            description,
            type_word,
            title_mask,
            type_bit,
        });
    }
    out
}

fn gen_description(rng: &mut Stream, type_word: &str) -> String {
    let mut words: Vec<&str> = vec!["a"];
    for _ in 0..(6 + rng.index(10)) {
        let pool = rng.index(4);
        words.push(match pool {
            0 => FILLER[rng.index(FILLER.len())],
            1 => MATERIALS[rng.index(MATERIALS.len())],
            2 => STYLES[rng.index(STYLES.len())],
            _ => COLORS[rng.index(COLORS.len())],
        });
    }
    words.push(type_word);
    words.push("for the living room");
    words.join(" ")
}

struct GenQuery {
    text: String,
    class: &'static str,
    mask: u128,
    type_bit: u128,
}

fn gen_queries(spec: &SynthSpec, products: &[GenProduct], ids: &[&'static str]) -> Vec<GenQuery> {
    let mut rng = Stream::substream(spec.seed, QUERY_LABEL);
    let mut out = Vec::with_capacity(spec.queries);
    for _ in 0..spec.queries {
        // anchor on a real product so at least one exact match exists
        let anchor = &products[rng.index(products.len())];
        let lower = anchor.title_raw.to_lowercase();
        let title_words: Vec<&str> = lower
            .split(' ')
            .filter(|w| ids.contains(w))
            .collect();
        let brand: Vec<&str> = title_words
            .iter()
            .copied()
            .take_while(|w| *w != anchor.type_word)
            .take(2)
            .filter(|w| BRANDS.iter().any(|(a, b)| a == w || b == w))
            .collect();

        let mut words: Vec<&str> = Vec::new();
        if brand.len() == 2 && rng.unit_f64() < 0.45 {
            words.extend(&brand);
        } else {
            // one or two non-type attribute words from the anchor title
            let attrs: Vec<&str> = title_words
                .iter()
                .copied()
                .filter(|w| *w != anchor.type_word && !brand.contains(w))
                .collect();
            if !attrs.is_empty() {
                words.push(attrs[rng.index(attrs.len())]);
                if attrs.len() > 1 && rng.unit_f64() < 0.3 {
                    let second = attrs[rng.index(attrs.len())];
                    if !words.contains(&second) {
                        words.push(second);
                    }
                }
            }
        }
        words.push(anchor.type_word);
        let text = words.join(" ");
        let mask = mask_of(&words, ids);
        out.push(GenQuery {
            text,
            class: anchor.type_word,
            mask,
            type_bit: anchor.type_bit,
        });
    }
    out
}

/// Per-query grades in WANDS proportions: every product whose title covers
/// all query words is exact, same-type products are partial, the rest are
/// irrelevant. Padding keeps the requested grand total.
fn gen_labels(
    spec: &SynthSpec,
    products: &[GenProduct],
    queries: &[GenQuery],
) -> Result<Vec<(u32, u32, &'static str)>> {
    if spec.labels > spec.products * spec.queries {
        return Err(CliError::Config(format!(
            "cannot place {} labels over {} query-product pairs",
            spec.labels,
            spec.products * spec.queries
        )));
    }
    let mut rng = Stream::substream(spec.seed, LABEL_LABEL);
    let base = spec.labels / spec.queries.max(1);
    let mut remainder = spec.labels % spec.queries.max(1);
    let mut out = Vec::with_capacity(spec.labels);

    for (qid, query) in queries.iter().enumerate() {
        let mut quota = base;
        if remainder > 0 {
            quota += 1;
            remainder -= 1;
        }
        let mut exact = Vec::new();
        let mut partial = Vec::new();
        let mut irrelevant = Vec::new();
        for (pid, p) in products.iter().enumerate() {
            if p.title_mask & query.mask == query.mask {
                exact.push(pid);
            } else if p.title_mask & query.type_bit != 0 {
                partial.push(pid);
            } else {
                irrelevant.push(pid);
            }
        }

        let take_exact = exact.len().min(quota).min(60.max(quota / 8));
        let rest = quota - take_exact;
        let take_partial = partial.len().min(rest * 3 / 10);
        let mut take_irrelevant = rest - take_partial;
        let mut extra_partial = 0;
        if take_irrelevant > irrelevant.len() {
            extra_partial = (take_irrelevant - irrelevant.len()).min(partial.len() - take_partial);
            take_irrelevant = irrelevant.len();
        }

        fn emit(
            out: &mut Vec<(u32, u32, &'static str)>,
            qid: u32,
            pool: &[usize],
            n: usize,
            grade: &'static str,
            rng: &mut Stream,
        ) {
            for i in rng.sample_indices(pool.len(), n) {
                out.push((qid, pool[i] as u32, grade));
            }
        }
        let before = out.len();
        emit(&mut out, qid as u32, &exact, take_exact, "Exact", &mut rng);
        emit(&mut out, qid as u32, &partial, take_partial + extra_partial, "Partial", &mut rng);
        emit(&mut out, qid as u32, &irrelevant, take_irrelevant, "Irrelevant", &mut rng);

        let placed = out.len() - before;
        if placed < quota {
            // tiny catalogs: grade pools exhausted, pad from leftover exacts
            let leftover: Vec<usize> = exact.iter().copied().skip(take_exact).collect();
            emit(&mut out, qid as u32, &leftover, quota - placed, "Exact", &mut rng);
        }
        if out.len() - before != quota {
            return Err(CliError::Config(format!(
                "query {qid} cannot reach its label quota of {quota}"
            )));
        }
    }
    if out.len() != spec.labels {
        return Err(CliError::Internal(format!(
            "generated {} labels, wanted {}",
            out.len(),
            spec.labels
        )));
    }
    Ok(out)
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| CliError::io(path, e))
}

/// Writes products.tsv, queries.tsv, labels.tsv and brands.txt under `dir`.
pub fn generate(spec: &SynthSpec, dir: &Path) -> Result<SynthPaths> {
    if spec.products == 0 || spec.queries == 0 {
        return Err(CliError::Config(
            "corpus generation needs at least one product and one query".into(),
        ));
    }
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let ids = title_word_ids();
    let products = gen_products(spec, &ids);
    let queries = gen_queries(spec, &products, &ids);
    let labels = gen_labels(spec, &products, &queries)?;

    let mut rng = Stream::substream(spec.seed, 0x6d657461); // "meta"
    let mut p_text = String::from(
        "product_id\tproduct_name\tproduct_class\tcategory hierarchy\tproduct_description\tproduct_features\trating_count\taverage_rating\treview_count\n",
    );
    for (pid, p) in products.iter().enumerate() {
        let rating_count = rng.index(500);
        let avg = 1.0 + (rng.index(40) as f64) / 10.0;
        let _ = writeln!(
            p_text,
            "{pid}\t{}\t{}\tfurniture / {}\t{}\ttype:{}|rated:{avg}\t{rating_count}\t{avg}\t{}",
            p.title_raw,
            p.type_word,
            p.type_word,
            p.description,
            p.type_word,
            rng.index(200),
        );
    }

    let mut q_text = String::from("query_id\tquery\tquery_class\n");
    for (qid, q) in queries.iter().enumerate() {
        let _ = writeln!(q_text, "{qid}\t{}\t{}", q.text, q.class);
    }

    let mut l_text = String::from("id\tquery_id\tproduct_id\tlabel\n");
    for (i, (qid, pid, grade)) in labels.iter().enumerate() {
        let _ = writeln!(l_text, "{i}\t{qid}\t{pid}\t{grade}");
    }

    let brand_lines: Vec<String> = BRANDS
        .iter()
        .map(|(a, b)| format!("{} {}", capitalize(a), capitalize(b)))
        .collect();

    let paths = SynthPaths {
        products: dir.join("products.tsv"),
        queries: dir.join("queries.tsv"),
        labels: dir.join("labels.tsv"),
        brands: dir.join("brands.txt"),
    };
    write_file(&paths.products, &p_text)?;
    write_file(&paths.queries, &q_text)?;
    write_file(&paths.labels, &l_text)?;
    write_file(&paths.brands, &(brand_lines.join("\n") + "\n"))?;
    Ok(paths)
}

/// Capitalized-bigram scan over a raw products file: a heuristic stand-in
/// for a curated brand list.
pub fn suggest_brands(products_path: &Path, min_count: usize) -> Result<Vec<(String, usize)>> {
    let text = std::fs::read_to_string(products_path)
        .map_err(|e| CliError::io(products_path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{}: {e}", products_path.display())))?;
    let title_col = headers
        .iter()
        .position(|h| h.trim() == "product_name" || h.trim() == "title")
        .ok_or_else(|| {
            CliError::Data(format!(
                "{}: missing required column 'product_name'",
                products_path.display()
            ))
        })?;

    let mut counts: std::collections::BTreeMap<String, usize> = std::collections::BTreeMap::new();
    for record in reader.records() {
        let record =
            record.map_err(|e| CliError::Data(format!("{}: {e}", products_path.display())))?;
        let title = record.get(title_col).unwrap_or("");
        let words: Vec<&str> = title.split_whitespace().collect();
        for pair in words.windows(2) {
            let cap = |w: &str| w.chars().next().is_some_and(|c| c.is_uppercase());
            if cap(pair[0]) && cap(pair[1]) {
                let key = format!("{} {}", pair[0], pair[1]).to_lowercase();
                *counts.entry(key).or_insert(0) += 1;
            }
        }
    }
    let mut suggestions: Vec<(String, usize)> =
        counts.into_iter().filter(|(_, c)| *c >= min_count).collect();
    suggestions.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(suggestions)
}
