//! `stats`: per-dataset corpus report.

use std::path::{Path, PathBuf};

use corpora_core::error::Result;
use corpora_core::manifest::{read_manifest, CorpusStats, DetectConfig, StatsAccumulator};
use corpora_core::MANIFEST_SCHEMA_VERSION;

use super::{OutputFormat, StageSummary};
use crate::io::write_text;

#[derive(Debug, Clone)]
pub struct StatsParams {
    pub manifest: PathBuf,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
}

pub fn run(params: &StatsParams) -> Result<StageSummary> {
    let mut accumulator = StatsAccumulator::new();
    let mut input_count = 0u64;
    for example in read_manifest(&params.manifest)? {
        accumulator.add(&example?);
        input_count += 1;
    }
    let stats = accumulator.finalize(&DetectConfig::default());

    let rendered = match params.format {
        OutputFormat::Json => render_json(&stats),
        OutputFormat::Table => render_table(&stats),
    };
    emit(&rendered, params.out.as_deref())?;

    Ok(StageSummary {
        input_count,
        output_count: stats.len() as u64,
        ..Default::default()
    }
    .detail("datasets", &stats))
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

fn render_json(stats: &[CorpusStats]) -> String {
    let doc = serde_json::json!({
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "datasets": stats,
    });
    format!("{}\n", serde_json::to_string_pretty(&doc).expect("stats serialize"))
}

fn render_table(stats: &[CorpusStats]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<20} {:>12} {:>10} {:<16} {:>11} {:>5} {:>9}\n",
        "Dataset", "Volume (h)", "#Examples", "Languages", "Punctuation", "Case", "Long-Form"
    ));
    for row in stats {
        let languages = if row.languages.len() <= 3 {
            row.languages.iter().cloned().collect::<Vec<_>>().join(",")
        } else {
            format!("{} languages", row.languages.len())
        };
        let case = match row.has_case {
            None => "-",
            Some(true) => "yes",
            Some(false) => "no",
        };
        out.push_str(&format!(
            "{:<20} {:>12.2} {:>10} {:<16} {:>11} {:>5} {:>9}\n",
            row.dataset,
            row.volume_hours,
            row.num_examples,
            languages,
            if row.has_punctuation { "yes" } else { "no" },
            case,
            if row.has_longform { "yes" } else { "no" },
        ));
    }
    out
}
