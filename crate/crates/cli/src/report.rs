//! Text report writers. Every report opens with a '#'-prefixed header
//! (title, build version, reference constants, the full resolved config)
//! followed by bare tab-separated rows, so the numeric body of two runs can
//! be compared by filtering out comment lines.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use termsim_core::metrics::EvalReport;
use termsim_core::trainer::TrainStats;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::formats;

/// Headline numbers of the original full-scale system, for orientation only:
/// that system scores with BERT towers, this one with bag-of-token tables.
pub const REFERENCE_NOTE: &str =
    "reference, original full-scale system (BERT-based): mAP@12 56.1%, R@1k 86.6%";

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(path, e))?;
        }
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn push_header(out: &mut String, cfg: &RunConfig, title: &str, with_reference: bool) {
    let _ = writeln!(out, "# {title}");
    let _ = writeln!(out, "# build: {}", formats::build_version());
    if with_reference {
        let _ = writeln!(out, "# {REFERENCE_NOTE}");
    }
    let _ = writeln!(out, "# config:");
    for line in cfg.canonical_text().lines() {
        let _ = writeln!(out, "#   {line}");
    }
}

pub fn write_train_log(cfg: &RunConfig, stats: &TrainStats) -> Result<PathBuf> {
    let path = cfg.artifact("train_log.tsv");
    let mut s = String::new();
    push_header(&mut s, cfg, "training log", false);
    let _ = writeln!(s, "epoch\ttriplets\tskipped_triplets\tmean_loss\tzero_loss_fraction\tseconds");
    for (i, e) in stats.epochs.iter().enumerate() {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.3}",
            i + 1,
            e.triplets,
            e.skipped_triplets,
            e.mean_loss,
            e.zero_loss_fraction,
            e.seconds
        );
    }
    write_text(&path, &s)?;
    Ok(path)
}

fn id_list(ids: &[u32]) -> String {
    if ids.is_empty() {
        "none".to_string()
    } else {
        ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
    }
}

/// Writes `per_query_<mode>.tsv` (one row per query per cutoff) and
/// `summary_<mode>.tsv` (one row per cutoff, unweighted means).
pub fn write_eval_reports(
    cfg: &RunConfig,
    mode: &str,
    report: &EvalReport,
) -> Result<(PathBuf, PathBuf)> {
    let per_query_path = cfg.artifact(&format!("per_query_{mode}.tsv"));
    let mut pq = String::new();
    push_header(&mut pq, cfg, &format!("per-query metrics, {mode} rescoring"), true);
    let _ = writeln!(pq, "query_id\tk\tprecision\trecall\tmap");
    for row in &report.per_query {
        let _ = writeln!(
            pq,
            "{}\t{}\t{:.6}\t{:.6}\t{:.6}",
            row.query_id, row.k, row.precision, row.recall, row.map
        );
    }
    write_text(&per_query_path, &pq)?;

    let summary_path = cfg.artifact(&format!("summary_{mode}.tsv"));
    let mut sm = String::new();
    push_header(&mut sm, cfg, &format!("aggregate metrics, {mode} rescoring"), true);
    let _ = writeln!(sm, "# evaluated queries: {}", report.evaluated);
    let _ = writeln!(sm, "# skipped, no judgments: {}", id_list(&report.skipped_unjudged));
    let _ = writeln!(sm, "# skipped, empty ground truth: {}", id_list(&report.skipped_empty_truth));
    let _ = writeln!(sm, "k\tprecision\trecall\tmap");
    for a in &report.aggregates {
        let _ = writeln!(sm, "{}\t{:.6}\t{:.6}\t{:.6}", a.k, a.precision, a.recall, a.map);
    }
    write_text(&summary_path, &sm)?;
    Ok((per_query_path, summary_path))
}

/// Headline metrics of one ablation cell.
#[derive(Debug, Clone, Copy)]
pub struct CellMetrics {
    pub map_small: f64,
    pub recall_large: f64,
}

/// One ablation grid row; `metrics` carries the failure text when the cell
/// did not complete.
#[derive(Debug, Clone)]
pub struct CellRow {
    pub name: String,
    pub tokenizer: String,
    pub mt: bool,
    pub dim: usize,
    pub variant: String,
    pub metrics: std::result::Result<CellMetrics, String>,
}

fn sanitize(msg: &str) -> String {
    msg.replace(['\t', '\n'], " ")
}

pub fn render_ablation_table(
    cfg: &RunConfig,
    rows: &[CellRow],
    k_small: usize,
    k_large: usize,
    mode: &str,
) -> String {
    let mut s = String::new();
    push_header(&mut s, cfg, "ablation grid", true);
    let _ = writeln!(s, "# rescoring mode: {mode}");
    let _ = writeln!(
        s,
        "cell\ttokenizer\tmt\tdim\tvariant\tmap@{k_small}\trecall@{k_large}\tstatus"
    );
    for row in rows {
        match &row.metrics {
            Ok(m) => {
                let _ = writeln!(
                    s,
                    "{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\tok",
                    row.name, row.tokenizer, row.mt, row.dim, row.variant, m.map_small, m.recall_large
                );
            }
            Err(e) => {
                let _ = writeln!(
                    s,
                    "{}\t{}\t{}\t{}\t{}\t-\t-\t{}",
                    row.name, row.tokenizer, row.mt, row.dim, row.variant, sanitize(e)
                );
            }
        }
    }
    let ok = |r: &&CellRow| r.metrics.is_ok();
    if let Some(best) = rows.iter().filter(ok).max_by(|a, b| {
        let (ma, mb) = (a.metrics.as_ref().unwrap(), b.metrics.as_ref().unwrap());
        ma.map_small
            .total_cmp(&mb.map_small)
            .then(ma.recall_large.total_cmp(&mb.recall_large))
            .then(b.name.cmp(&a.name))
    }) {
        let m = best.metrics.as_ref().unwrap();
        let _ = writeln!(
            s,
            "# best cell: {} (map@{}={:.6}, recall@{}={:.6})",
            best.name, k_small, m.map_small, k_large, m.recall_large
        );
    }
    let mean_of = |want_mt: bool| {
        let vals: Vec<f64> = rows
            .iter()
            .filter(|r| r.mt == want_mt)
            .filter_map(|r| r.metrics.as_ref().ok().map(|m| m.map_small))
            .collect();
        (!vals.is_empty()).then(|| (vals.iter().sum::<f64>() / vals.len() as f64, vals.len()))
    };
    if let (Some((mt_mean, mt_n)), Some((plain_mean, plain_n))) = (mean_of(true), mean_of(false)) {
        let _ = writeln!(
            s,
            "# observational: mean map@{} with brand terms {:.6} ({} cells) vs without {:.6} ({} cells)",
            k_small, mt_mean, mt_n, plain_mean, plain_n
        );
    }
    s
}
