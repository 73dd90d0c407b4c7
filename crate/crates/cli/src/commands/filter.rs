//! `filter`: score every example's hypothesis against its own label,
//! rank per dataset, discard the worst k%, and optionally draw proxy-task
//! samples from the kept set.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use corpora_core::align::error_rate;
use corpora_core::error::{Error, Result};
use corpora_core::filter::{
    proxy_sample, rank_and_discard, rank_and_discard_by_duration, FilterConfig, FilterDecision,
    Verdict,
};
use corpora_core::manifest::{ensure_unique_ids, read_manifest_vec, write_manifest, TextRecord};

use super::{Metric, StageSummary};
use crate::io::{read_jsonl, write_jsonl};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscardBasis {
    /// Discard count = floor(n * k / 100) examples.
    Count,
    /// Discard the worst examples while their duration fits in k% of the
    /// dataset's total hours.
    Duration,
}

#[derive(Debug, Clone)]
pub struct FilterParams {
    pub manifest: PathBuf,
    pub hyp: PathBuf,
    pub k: Option<f64>,
    pub k_overrides: Vec<(String, f64)>,
    pub out: PathBuf,
    pub decisions: Option<PathBuf>,
    pub by: DiscardBasis,
    pub metric: Metric,
    pub proxy_out: Option<PathBuf>,
    pub proxy_n: u64,
    pub seed: u64,
}

/// Decisions-file line: the per-example verdict plus its dataset partition.
#[derive(Debug, Clone, Serialize)]
struct DecisionRecord {
    id: String,
    dataset: String,
    cer: f64,
    rank: u64,
    verdict: Verdict,
}

pub fn run(params: &FilterParams) -> Result<StageSummary> {
    let examples = read_manifest_vec(&params.manifest)?;
    ensure_unique_ids(&examples)?;
    let hyp_records: Vec<TextRecord> = read_jsonl(&params.hyp)?;
    let mut hyps: BTreeMap<&str, &str> = BTreeMap::new();
    for record in &hyp_records {
        if hyps.insert(&record.id, &record.text).is_some() {
            return Err(Error::Data(format!(
                "duplicate hypothesis for example id {:?}",
                record.id
            )));
        }
    }

    let mut config = FilterConfig {
        seed: params.seed,
        proxy_n: params.proxy_n,
        ..FilterConfig::default()
    };
    if let Some(k) = params.k {
        config.k_percent = k;
    }
    for (dataset, k) in &params.k_overrides {
        config.per_dataset_overrides.insert(dataset.clone(), *k);
    }
    config.validate()?;

    // Filtering keys on y_src: hypotheses come from an ASR proxy decode
    // even for translation examples.
    let policy = params.metric.policy();
    let scored: Vec<(usize, f64)> = examples
        .par_iter()
        .enumerate()
        .map(|(idx, example)| {
            let hyp = hyps.get(example.id.as_str()).copied().ok_or_else(|| {
                Error::Data(format!("no hypothesis for example id {:?}", example.id))
            })?;
            let rates = error_rate(&example.y_src, hyp, &example.language, &policy);
            Ok((idx, rates.total()))
        })
        .collect::<Result<_>>()?;

    // Partition per dataset; each partition ranks under its own k.
    let mut partitions: BTreeMap<&str, Vec<(String, f64, f64)>> = BTreeMap::new();
    for (idx, cer) in &scored {
        let example = &examples[*idx];
        partitions.entry(&example.dataset).or_default().push((
            example.id.clone(),
            *cer,
            example.duration_sec,
        ));
    }

    let mut decisions_by_dataset: BTreeMap<String, Vec<FilterDecision>> = BTreeMap::new();
    for (dataset, entries) in &partitions {
        let k = config.k_for(dataset);
        let decisions = match params.by {
            DiscardBasis::Count => {
                let pairs: Vec<(String, f64)> =
                    entries.iter().map(|(id, cer, _)| (id.clone(), *cer)).collect();
                rank_and_discard(&pairs, k)?
            }
            DiscardBasis::Duration => rank_and_discard_by_duration(entries, k)?,
        };
        decisions_by_dataset.insert(dataset.to_string(), decisions);
    }

    let mut verdicts: BTreeMap<&str, Verdict> = BTreeMap::new();
    for decisions in decisions_by_dataset.values() {
        for d in decisions {
            verdicts.insert(d.example_id.as_str(), d.verdict);
        }
    }

    let kept: Vec<&corpora_core::Example> = examples
        .iter()
        .filter(|e| verdicts.get(e.id.as_str()) == Some(&Verdict::Keep))
        .collect();
    write_manifest(&params.out, kept.iter().copied())?;

    if let Some(path) = &params.decisions {
        let mut records = Vec::new();
        for (dataset, decisions) in &decisions_by_dataset {
            for d in decisions {
                records.push(DecisionRecord {
                    id: d.example_id.clone(),
                    dataset: dataset.clone(),
                    cer: d.cer,
                    rank: d.rank,
                    verdict: d.verdict,
                });
            }
        }
        write_jsonl(path, &records)?;
    }

    if let Some(path) = &params.proxy_out {
        #[derive(Serialize)]
        struct ProxyLine<'a> {
            dataset: &'a str,
            id: String,
        }
        let mut lines = Vec::new();
        for (dataset, decisions) in &decisions_by_dataset {
            let kept_ids: Vec<String> = decisions
                .iter()
                .filter(|d| d.verdict == Verdict::Keep)
                .map(|d| d.example_id.clone())
                .collect();
            let k = config.k_for(dataset);
            for id in proxy_sample(&kept_ids, k, config.proxy_n, config.seed) {
                lines.push(ProxyLine { dataset, id });
            }
        }
        write_jsonl(path, &lines)?;
    }

    let discarded = examples.len() - kept.len();
    let per_dataset: BTreeMap<&String, usize> = decisions_by_dataset
        .iter()
        .map(|(d, v)| (d, v.iter().filter(|x| x.verdict == Verdict::Discard).count()))
        .collect();
    eprintln!(
        "filter: kept {} of {} examples ({} discarded)",
        kept.len(),
        examples.len(),
        discarded
    );

    Ok(StageSummary {
        input_count: examples.len() as u64,
        output_count: kept.len() as u64,
        ..Default::default()
    }
    .detail("discarded", discarded)
    .detail("per_dataset_discarded", per_dataset))
}
