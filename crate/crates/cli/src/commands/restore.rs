//! `restore`: apply candidate restorations under the constrained-acceptance
//! rules, propagate context chains, and write a full audit trail.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use corpora_core::error::{Error, Result};
use corpora_core::llm::{CandidateRecord, CandidateStatus};
use corpora_core::manifest::{ensure_unique_ids, read_manifest_vec, write_manifest, Example};
use corpora_core::restore::{
    propagate_context, restore_example, restore_source, EditDecision, RestoreConfig,
    RestoreStatus,
};

use super::StageSummary;
use crate::io::{read_jsonl, write_jsonl};

#[derive(Debug, Clone)]
pub struct RestoreParams {
    pub manifest: PathBuf,
    pub candidates: PathBuf,
    pub src_candidates: Option<PathBuf>,
    pub threshold: f64,
    pub out: PathBuf,
    pub audit: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
struct AuditDecision {
    class: corpora_core::EditClass,
    #[serde(skip_serializing_if = "Option::is_none")]
    original: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    candidate: Option<String>,
    accepted: bool,
}

#[derive(Debug, Clone, Serialize)]
struct AuditRecord {
    id: String,
    status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual_wer: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    decisions: Vec<AuditDecision>,
}

fn audit_decisions(decisions: &[EditDecision]) -> Vec<AuditDecision> {
    decisions
        .iter()
        .map(|d| AuditDecision {
            class: d.class,
            original: d.op.ref_token().map(|t| t.surface().to_string()),
            candidate: d.op.hyp_token().map(|t| t.surface().to_string()),
            accepted: d.accepted,
        })
        .collect()
}

fn candidate_map(records: Vec<CandidateRecord>) -> Result<BTreeMap<String, CandidateRecord>> {
    let mut map = BTreeMap::new();
    for record in records {
        let id = record.id.clone();
        if map.insert(id.clone(), record).is_some() {
            return Err(Error::Data(format!("duplicate candidate for id {id:?}")));
        }
    }
    Ok(map)
}

fn status_name(status: RestoreStatus) -> &'static str {
    match status {
        RestoreStatus::Accepted => "accepted",
        RestoreStatus::RejectedResidual => "rejected_residual",
        RestoreStatus::RejectedNoChange => "rejected_no_change",
    }
}

pub fn run(params: &RestoreParams) -> Result<StageSummary> {
    let examples = read_manifest_vec(&params.manifest)?;
    ensure_unique_ids(&examples)?;
    let candidates = candidate_map(read_jsonl(&params.candidates)?)?;
    let src_candidates = match &params.src_candidates {
        Some(path) => Some(candidate_map(read_jsonl(path)?)?),
        None => None,
    };

    let config = RestoreConfig {
        reject_threshold: params.threshold,
        ..RestoreConfig::default()
    };

    let processed: Vec<(Example, AuditRecord)> = examples
        .par_iter()
        .map(|example| process_one(example, &candidates, src_candidates.as_ref(), &config))
        .collect();

    let mut restored: Vec<Example> = Vec::with_capacity(processed.len());
    let mut audits: Vec<AuditRecord> = Vec::with_capacity(processed.len());
    for (example, audit) in processed {
        restored.push(example);
        audits.push(audit);
    }

    // Second pass: successors inside each recording pick up the restored
    // text of their predecessor as context.
    propagate_context(&mut restored);

    write_manifest(&params.out, &restored)?;
    if let Some(path) = &params.audit {
        write_jsonl(path, &audits)?;
    }

    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for audit in &audits {
        *counts.entry(audit.status.clone()).or_default() += 1;
    }
    eprintln!(
        "restore: {}",
        counts
            .iter()
            .map(|(k, v)| format!("{k} {v}"))
            .collect::<Vec<_>>()
            .join(", ")
    );

    Ok(StageSummary {
        input_count: examples.len() as u64,
        output_count: restored.len() as u64,
        ..Default::default()
    }
    .detail("statuses", counts))
}

fn process_one(
    example: &Example,
    candidates: &BTreeMap<String, CandidateRecord>,
    src_candidates: Option<&BTreeMap<String, CandidateRecord>>,
    config: &RestoreConfig,
) -> (Example, AuditRecord) {
    let (mut updated, audit) = match candidates.get(&example.id) {
        None => (
            example.clone(),
            AuditRecord {
                id: example.id.clone(),
                status: "no_candidate".to_string(),
                residual_wer: None,
                decisions: Vec::new(),
            },
        ),
        Some(record) => match (&record.status, &record.candidate_text) {
            (CandidateStatus::Ok, Some(text)) => {
                let (outcome, updated) = restore_example(example, text, config);
                (
                    updated,
                    AuditRecord {
                        id: example.id.clone(),
                        status: status_name(outcome.status).to_string(),
                        residual_wer: Some(outcome.residual_wer),
                        decisions: audit_decisions(&outcome.decisions),
                    },
                )
            }
            (CandidateStatus::Skipped, _) => (
                example.clone(),
                AuditRecord {
                    id: example.id.clone(),
                    status: "skipped".to_string(),
                    residual_wer: None,
                    decisions: Vec::new(),
                },
            ),
            _ => (
                // Fail-open: endpoint failures leave the example untouched.
                example.clone(),
                AuditRecord {
                    id: example.id.clone(),
                    status: "llm_failed".to_string(),
                    residual_wer: None,
                    decisions: Vec::new(),
                },
            ),
        },
    };

    if let Some(src_map) = src_candidates {
        if let Some(record) = src_map.get(&example.id) {
            if let (CandidateStatus::Ok, Some(text)) = (&record.status, &record.candidate_text) {
                let (_, with_src) = restore_source(&updated, text, config);
                updated = with_src;
            }
        }
    }

    (updated, audit)
}
