//! Tab-separated dataset loading in the WANDS layout: a products file, a
//! queries file and a graded labels file, each with a header row. Columns
//! are located by name, never by position.

use std::collections::BTreeMap;
use std::path::Path;

use termsim_core::corpus::{normalize_text, Corpus, CorpusWarnings, Grade, Product, Query, RelevanceLabel};

use crate::error::{CliError, Result};

/// Row counts as parsed, before corpus validation.
#[derive(Debug, Clone, Copy)]
pub struct LoadCounts {
    pub products: usize,
    pub queries: usize,
    pub labels: usize,
}

struct Table {
    headers: Vec<String>,
    rows: Vec<(u64, csv::StringRecord)>,
}

fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e
                .position()
                .map(|p| p.line().to_string())
                .unwrap_or_else(|| "?".to_string());
            CliError::Data(format!("{} line {line}: {e}", path.display()))
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        rows.push((line, record));
    }
    Ok(Table { headers, rows })
}

impl Table {
    fn column(&self, path: &Path, names: &[&str]) -> Result<usize> {
        for name in names {
            if let Some(i) = self.headers.iter().position(|h| h == name) {
                return Ok(i);
            }
        }
        Err(CliError::Data(format!(
            "{}: missing required column '{}' (header row: {})",
            path.display(),
            names[0],
            self.headers.join(", ")
        )))
    }

    fn optional_column(&self, names: &[&str]) -> Option<usize> {
        names
            .iter()
            .find_map(|name| self.headers.iter().position(|h| h == name))
    }
}

fn parse_id(path: &Path, line: u64, field: &str, what: &str) -> Result<u32> {
    field.trim().parse().map_err(|_| {
        CliError::Data(format!(
            "{} line {line}: {what} '{field}' is not a non-negative integer",
            path.display()
        ))
    })
}

fn load_products(path: &Path) -> Result<Vec<Product>> {
    let table = read_table(path)?;
    let id_col = table.column(path, &["product_id"])?;
    let title_col = table.column(path, &["product_name", "title"])?;
    let desc_col = table.optional_column(&["product_description", "description"]);
    let mut products = Vec::with_capacity(table.rows.len());
    for (line, row) in &table.rows {
        let id = parse_id(path, *line, row.get(id_col).unwrap_or(""), "product_id")?;
        let mut extra_fields = BTreeMap::new();
        for (i, header) in table.headers.iter().enumerate() {
            if i != id_col && i != title_col && Some(i) != desc_col {
                extra_fields.insert(header.clone(), row.get(i).unwrap_or("").to_string());
            }
        }
        products.push(Product {
            product_id: id,
            title: row.get(title_col).unwrap_or("").to_string(),
            description: desc_col
                .and_then(|c| row.get(c))
                .map(str::to_string)
                .filter(|d| !d.trim().is_empty()),
            extra_fields,
        });
    }
    Ok(products)
}

fn load_queries(path: &Path) -> Result<Vec<Query>> {
    let table = read_table(path)?;
    let id_col = table.column(path, &["query_id"])?;
    let text_col = table.column(path, &["query", "query_text", "text"])?;
    table
        .rows
        .iter()
        .map(|(line, row)| {
            Ok(Query {
                query_id: parse_id(path, *line, row.get(id_col).unwrap_or(""), "query_id")?,
                text: row.get(text_col).unwrap_or("").to_string(),
            })
        })
        .collect()
}

fn load_labels(path: &Path) -> Result<Vec<RelevanceLabel>> {
    let table = read_table(path)?;
    let q_col = table.column(path, &["query_id"])?;
    let p_col = table.column(path, &["product_id"])?;
    let grade_col = table.column(path, &["label", "grade"])?;
    table
        .rows
        .iter()
        .map(|(line, row)| {
            let raw = row.get(grade_col).unwrap_or("").trim();
            let grade = Grade::parse(raw).ok_or_else(|| {
                CliError::Data(format!(
                    "{} line {line}: unknown grade '{raw}' (expected exact, partial or irrelevant)",
                    path.display()
                ))
            })?;
            Ok(RelevanceLabel {
                query_id: parse_id(path, *line, row.get(q_col).unwrap_or(""), "query_id")?,
                product_id: parse_id(path, *line, row.get(p_col).unwrap_or(""), "product_id")?,
                grade,
            })
        })
        .collect()
}

/// Loads and validates the three dataset files.
pub fn load_corpus(
    products_path: &Path,
    queries_path: &Path,
    labels_path: &Path,
) -> Result<(Corpus, CorpusWarnings, LoadCounts)> {
    let products = load_products(products_path)?;
    let queries = load_queries(queries_path)?;
    let labels = load_labels(labels_path)?;
    let counts = LoadCounts {
        products: products.len(),
        queries: queries.len(),
        labels: labels.len(),
    };
    let (corpus, warnings) = Corpus::new(products, queries, labels)?;
    Ok((corpus, warnings, counts))
}

/// One brand per line, normalized; blank lines are skipped.
pub fn load_brand_list(path: &Path) -> Result<std::collections::BTreeSet<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(text
        .lines()
        .map(normalize_text)
        .filter(|l| !l.is_empty())
        .collect())
}
