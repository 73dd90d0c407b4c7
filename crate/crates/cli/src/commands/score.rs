//! `score`: CER/WER/pc-CER/pc-WER with the sub/ins/del decomposition,
//! per-example counts for downstream filtering, and an optional baseline
//! comparison with relative-reduction columns.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use corpora_core::align::{error_rate, ErrorRates};
use corpora_core::error::Result;
use corpora_core::longform::{deletion_report, DeletionReportLine, DeletionReportRow, RateSummary};

use super::{Metric, OutputFormat, StageSummary};
use crate::io::{build_pairs, read_records, write_jsonl, write_text, RefField, ScoredPair};

#[derive(Debug, Clone)]
pub struct ScoreParams {
    pub ref_path: PathBuf,
    pub hyp_path: PathBuf,
    pub metric: Metric,
    pub language: String,
    pub ref_field: RefField,
    pub per_example: Option<PathBuf>,
    pub averaged: bool,
    pub baseline_hyp: Option<PathBuf>,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
}

/// One per-example line: the four counts plus the reference length drive
/// downstream filtering.
#[derive(Debug, Clone, Serialize)]
struct PairScore {
    id: String,
    matches: u64,
    substitutions: u64,
    insertions: u64,
    deletions: u64,
    ref_len: u64,
    hyp_len: u64,
    rate: f64,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    degenerate: bool,
}

#[derive(Debug, Clone, Serialize)]
struct ScoreReport {
    metric: &'static str,
    pairs: usize,
    matches: u64,
    substitutions: u64,
    insertions: u64,
    deletions: u64,
    ref_len: u64,
    total: f64,
    sub_rate: f64,
    ins_rate: f64,
    del_rate: f64,
    degenerate_pairs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    averaged: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    baseline_comparison: Option<Vec<DeletionReportLine>>,
}

fn score_pairs(pairs: &[ScoredPair], metric: Metric) -> Vec<ErrorRates> {
    let policy = metric.policy();
    pairs
        .par_iter()
        .map(|p| error_rate(&p.reference, &p.hypothesis, &p.language, &policy))
        .collect()
}

fn pool(rates: &[ErrorRates]) -> ErrorRates {
    let mut pooled = ErrorRates::default();
    for r in rates {
        pooled.merge(r);
    }
    pooled
}

pub fn run(params: &ScoreParams) -> Result<StageSummary> {
    let refs = read_records(&params.ref_path)?;
    let hyps = read_records(&params.hyp_path)?;
    let pairs = build_pairs(&refs, &hyps, params.ref_field, &params.language)?;
    let rates = score_pairs(&pairs, params.metric);
    let pooled = pool(&rates);

    if let Some(path) = &params.per_example {
        let lines: Vec<PairScore> = pairs
            .iter()
            .zip(&rates)
            .map(|(p, r)| PairScore {
                id: p.id.clone(),
                matches: r.matches,
                substitutions: r.substitutions,
                insertions: r.insertions,
                deletions: r.deletions,
                ref_len: r.ref_len,
                hyp_len: r.hyp_len,
                rate: r.total(),
                degenerate: r.degenerate(),
            })
            .collect();
        write_jsonl(path, &lines)?;
    }

    let averaged = params.averaged.then(|| {
        if rates.is_empty() {
            0.0
        } else {
            rates.iter().map(ErrorRates::total).sum::<f64>() / rates.len() as f64
        }
    });

    let baseline_comparison = match &params.baseline_hyp {
        Some(path) => {
            let baseline_hyps = read_records(path)?;
            let baseline_pairs =
                build_pairs(&refs, &baseline_hyps, params.ref_field, &params.language)?;
            let baseline_pooled = pool(&score_pairs(&baseline_pairs, params.metric));
            Some(deletion_report(&[DeletionReportRow {
                subset: "all".to_string(),
                baseline: RateSummary::from(&baseline_pooled),
                updated: RateSummary::from(&pooled),
            }]))
        }
        None => None,
    };

    let report = ScoreReport {
        metric: params.metric.name(),
        pairs: pairs.len(),
        matches: pooled.matches,
        substitutions: pooled.substitutions,
        insertions: pooled.insertions,
        deletions: pooled.deletions,
        ref_len: pooled.ref_len,
        total: pooled.total(),
        sub_rate: pooled.sub_rate(),
        ins_rate: pooled.ins_rate(),
        del_rate: pooled.del_rate(),
        degenerate_pairs: rates.iter().filter(|r| r.degenerate()).count(),
        averaged,
        baseline_comparison,
    };

    let rendered = match params.format {
        OutputFormat::Json => {
            format!("{}\n", serde_json::to_string_pretty(&report).expect("report serializes"))
        }
        OutputFormat::Table => render_table(&report),
    };
    emit(&rendered, params.out.as_deref())?;

    Ok(StageSummary {
        input_count: pairs.len() as u64,
        output_count: pairs.len() as u64,
        ..Default::default()
    }
    .detail("metric", params.metric.name())
    .detail("total", report.total)
    .detail("del_rate", report.del_rate))
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_text(path, text),
        None => {
            println!("{}", text.trim_end());
            Ok(())
        }
    }
}

fn render_table(report: &ScoreReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{}: {:.2}% over {} pairs ({} reference tokens)\n",
        report.metric,
        report.total * 100.0,
        report.pairs,
        report.ref_len
    ));
    out.push_str(&format!(
        "  sub {:.2}%  ins {:.2}%  del {:.2}%\n",
        report.sub_rate * 100.0,
        report.ins_rate * 100.0,
        report.del_rate * 100.0
    ));
    if report.degenerate_pairs > 0 {
        out.push_str(&format!(
            "  {} pair(s) with empty reference flagged degenerate\n",
            report.degenerate_pairs
        ));
    }
    if let Some(avg) = report.averaged {
        out.push_str(&format!("  averaged per-example rate: {:.2}%\n", avg * 100.0));
    }
    if let Some(lines) = &report.baseline_comparison {
        for line in lines {
            let fmt_change = |c: Option<f64>| match c {
                Some(v) => format!("{v:+.1}%"),
                None => "n/a".to_string(),
            };
            out.push_str(&format!(
                "  vs baseline [{}]: total {:.1} -> {:.1} ({}), deletion {:.1} -> {:.1} ({})\n",
                line.subset,
                line.baseline.total_pct,
                line.updated.total_pct,
                fmt_change(line.total_change_pct),
                line.baseline.deletion_pct,
                line.updated.deletion_pct,
                fmt_change(line.deletion_change_pct),
            ));
        }
    }
    out
}
