//! `splice`: pack segment timelines into long-form examples.

use std::collections::BTreeSet;
use std::path::PathBuf;

use corpora_core::error::{Error, Result};
use corpora_core::longform::{splice, LongFormExample, SegmentTimeline, SpliceConfig};

use super::StageSummary;
use crate::io::{read_jsonl, write_jsonl};

#[derive(Debug, Clone)]
pub struct SpliceParams {
    pub segments: PathBuf,
    pub max_duration_sec: f64,
    pub gap_tolerance_sec: f64,
    pub out: PathBuf,
    pub clean_only: bool,
}

pub fn run(params: &SpliceParams) -> Result<StageSummary> {
    let timelines: Vec<SegmentTimeline> = read_jsonl(&params.segments)?;
    let mut seen = BTreeSet::new();
    for tl in &timelines {
        if !seen.insert(tl.recording_id.as_str()) {
            return Err(Error::Data(format!(
                "duplicate timeline for recording {:?}",
                tl.recording_id
            )));
        }
    }

    let config = SpliceConfig {
        max_duration_sec: params.max_duration_sec,
        gap_tolerance_sec: params.gap_tolerance_sec,
        ..SpliceConfig::default()
    };

    let mut examples: Vec<LongFormExample> = Vec::new();
    for timeline in &timelines {
        examples.extend(splice(timeline, &config)?);
    }

    let total = examples.len();
    let clean = examples.iter().filter(|e| e.clean).count();
    let oversize = examples.iter().filter(|e| e.oversize).count();
    if params.clean_only {
        examples.retain(|e| e.clean);
    }
    write_jsonl(&params.out, &examples)?;

    eprintln!(
        "splice: {} timelines -> {} examples ({} clean, {} dirty, {} oversize){}",
        timelines.len(),
        total,
        clean,
        total - clean,
        oversize,
        if params.clean_only { "; kept clean only" } else { "" }
    );

    Ok(StageSummary {
        input_count: timelines.len() as u64,
        output_count: examples.len() as u64,
        ..Default::default()
    }
    .detail("spliced", total)
    .detail("clean", clean)
    .detail("dirty", total - clean)
    .detail("oversize", oversize))
}
