//! The example data model, the line-delimited manifest format, and
//! per-dataset corpus statistics.
//!
//! A manifest is UTF-8 text with one JSON object per line (see
//! `docs/manifest.md` for the field-by-field schema). Reading is streaming:
//! memory use is constant in corpus size.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textnorm::{LanguageRules, TextRules};

/// Version of the on-disk manifest record schema.
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Asr,
    St,
}

/// Where an example's speech lives inside a source recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioRef {
    pub recording_id: String,
    pub start_sec: f64,
    pub end_sec: f64,
}

/// One training example: speech reference plus the source transcription
/// (`y_src`), the target text (`y_tgt`, a transcription for ASR or a
/// translation for ST), and the previous target-text context (`y_prev`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub dataset: String,
    pub language: String,
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_language: Option<String>,
    pub audio: AudioRef,
    pub y_src: String,
    pub y_tgt: String,
    pub y_prev: String,
    pub duration_sec: f64,
}

fn valid_language_code(code: &str) -> bool {
    code.len() == 3 && code.bytes().all(|b| b.is_ascii_lowercase())
}

impl Example {
    /// Per-record invariants; violations surface as schema errors with the
    /// manifest line number attached.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("field `id` must be nonempty".into());
        }
        if !valid_language_code(&self.language) {
            return Err(format!(
                "field `language` must be an ISO-639-3 code, got {:?}",
                self.language
            ));
        }
        if let Some(tl) = &self.target_language {
            if !valid_language_code(tl) {
                return Err(format!(
                    "field `target_language` must be an ISO-639-3 code, got {tl:?}"
                ));
            }
        }
        if self.task == Task::Asr && self.target_language.is_some() {
            return Err("field `target_language` must be absent for asr examples".into());
        }
        if !self.duration_sec.is_finite() || self.duration_sec <= 0.0 {
            return Err(format!(
                "field `duration_sec` must be a positive number, got {}",
                self.duration_sec
            ));
        }
        if !self.audio.start_sec.is_finite() || self.audio.start_sec < 0.0 {
            return Err(format!(
                "field `audio.start_sec` must be nonnegative, got {}",
                self.audio.start_sec
            ));
        }
        if !self.audio.end_sec.is_finite() || self.audio.end_sec <= self.audio.start_sec {
            return Err(format!(
                "field `audio.end_sec` must exceed start_sec, got [{}, {}]",
                self.audio.start_sec, self.audio.end_sec
            ));
        }
        Ok(())
    }
}

/// Generic `{id, text}` line record, used for hypothesis files and other
/// per-example sidecars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextRecord {
    pub id: String,
    pub text: String,
}

/// Streaming manifest reader: yields one `Example` per line, in file order.
pub struct ManifestReader<R: Read> {
    lines: std::io::Lines<BufReader<R>>,
    line_no: usize,
}

impl ManifestReader<File> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(ManifestReader::new(file))
    }
}

impl<R: Read> ManifestReader<R> {
    pub fn new(reader: R) -> Self {
        ManifestReader {
            lines: BufReader::new(reader).lines(),
            line_no: 0,
        }
    }
}

fn parse_line(line: &str, line_no: usize) -> Result<Example> {
    let example: Example = serde_json::from_str(line).map_err(|e| {
        if e.classify() == serde_json::error::Category::Data {
            Error::Schema {
                line: line_no,
                message: e.to_string(),
            }
        } else {
            Error::MalformedLine {
                line: line_no,
                message: e.to_string(),
                content: line.to_string(),
            }
        }
    })?;
    example.validate().map_err(|message| Error::Schema {
        line: line_no,
        message,
    })?;
    Ok(example)
}

impl<R: Read> Iterator for ManifestReader<R> {
    type Item = Result<Example>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.line_no += 1;
            match self.lines.next()? {
                Ok(line) => {
                    if line.trim().is_empty() {
                        continue;
                    }
                    return Some(parse_line(&line, self.line_no));
                }
                Err(e) => {
                    return Some(Err(Error::io("<manifest>", e)));
                }
            }
        }
    }
}

/// Open a manifest for streaming iteration.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<ManifestReader<File>> {
    ManifestReader::open(path)
}

/// Read an entire manifest into memory. Fails on the first bad line.
pub fn read_manifest_vec(path: impl AsRef<Path>) -> Result<Vec<Example>> {
    read_manifest(path)?.collect()
}

/// Serialize one example in canonical form (fixed field order, compact
/// separators). Writing what `read_manifest` produced is byte-identical
/// for canonical-form files.
pub fn example_to_line(example: &Example) -> String {
    serde_json::to_string(example).expect("example serializes")
}

pub fn write_manifest_to<'a, W: Write>(
    writer: &mut W,
    examples: impl IntoIterator<Item = &'a Example>,
) -> Result<()> {
    for example in examples {
        writeln!(writer, "{}", example_to_line(example))
            .map_err(|e| Error::io("<manifest>", e))?;
    }
    Ok(())
}

pub fn write_manifest<'a>(
    path: impl AsRef<Path>,
    examples: impl IntoIterator<Item = &'a Example>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    write_manifest_to(&mut writer, examples)?;
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Reject duplicate example ids. Uniqueness is a manifest invariant but is
/// not enforced by the streaming reader (it would cost memory linear in the
/// corpus); callers that materialize examples check it here.
pub fn ensure_unique_ids(examples: &[Example]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for e in examples {
        if !seen.insert(e.id.as_str()) {
            return Err(Error::Data(format!("duplicate example id {:?}", e.id)));
        }
    }
    Ok(())
}

/// Per-dataset corpus report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub dataset: String,
    pub volume_hours: f64,
    pub num_examples: u64,
    pub languages: BTreeSet<String>,
    pub has_punctuation: bool,
    /// `None` when every example is in a language with no case distinction
    /// (rendered as a dash in table output).
    pub has_case: Option<bool>,
    pub has_longform: bool,
}

/// Text-feature detection knobs.
#[derive(Debug, Clone, Copy)]
pub struct DetectConfig {
    /// Fraction of examples that must exhibit a feature before the dataset
    /// is flagged for it; a single example suffices in tiny datasets.
    pub threshold: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig { threshold: 0.01 }
    }
}

#[derive(Debug, Clone, Default)]
struct DatasetAccumulator {
    num_examples: u64,
    duration_sum_sec: f64,
    languages: BTreeSet<String>,
    punct_examples: u64,
    cased_examples: u64,
    case_eligible_examples: u64,
    longform: bool,
}

/// Mergeable per-dataset statistics accumulator. `add` is order-insensitive
/// and `merge` is associative, so a manifest can be sharded by line ranges
/// and the partials combined.
#[derive(Debug, Clone, Default)]
pub struct StatsAccumulator {
    datasets: BTreeMap<String, DatasetAccumulator>,
    text_rules: TextRules,
    language_rules: LanguageRules,
}

fn contains_strippable_punct(text: &str, rules: &TextRules) -> bool {
    let chars: Vec<char> = text.chars().collect();
    chars.iter().enumerate().any(|(i, &c)| {
        let prev = if i > 0 { Some(chars[i - 1]) } else { None };
        let next = chars.get(i + 1).copied();
        rules.is_punct_at(prev, c, next)
    })
}

impl StatsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_rules(text_rules: TextRules, language_rules: LanguageRules) -> Self {
        StatsAccumulator {
            datasets: BTreeMap::new(),
            text_rules,
            language_rules,
        }
    }

    pub fn add(&mut self, example: &Example) {
        let acc = self.datasets.entry(example.dataset.clone()).or_default();
        acc.num_examples += 1;
        acc.duration_sum_sec += example.duration_sec;
        acc.languages.insert(example.language.clone());
        // Word-internal apostrophes do not make a corpus "punctuated";
        // normalized read-speech transcripts keep contractions.
        if contains_strippable_punct(&example.y_tgt, &self.text_rules) {
            acc.punct_examples += 1;
        }
        if !self.language_rules.is_caseless(&example.language) {
            acc.case_eligible_examples += 1;
            if example.y_tgt.chars().any(|c| c.is_uppercase()) {
                acc.cased_examples += 1;
            }
        }
        // Segmentation information shows up as either chained context or a
        // clip that does not start at the recording origin.
        if !example.y_prev.is_empty() || example.audio.start_sec > 0.0 {
            acc.longform = true;
        }
    }

    pub fn merge(&mut self, other: &StatsAccumulator) {
        for (dataset, theirs) in &other.datasets {
            let acc = self.datasets.entry(dataset.clone()).or_default();
            acc.num_examples += theirs.num_examples;
            acc.duration_sum_sec += theirs.duration_sum_sec;
            acc.languages
                .extend(theirs.languages.iter().cloned());
            acc.punct_examples += theirs.punct_examples;
            acc.cased_examples += theirs.cased_examples;
            acc.case_eligible_examples += theirs.case_eligible_examples;
            acc.longform |= theirs.longform;
        }
    }

    pub fn finalize(&self, config: &DetectConfig) -> Vec<CorpusStats> {
        let required = |n: u64| -> u64 {
            if n == 0 {
                return 1;
            }
            ((config.threshold * n as f64).ceil() as u64).max(1)
        };
        self.datasets
            .iter()
            .map(|(dataset, acc)| CorpusStats {
                dataset: dataset.clone(),
                volume_hours: acc.duration_sum_sec / 3600.0,
                num_examples: acc.num_examples,
                languages: acc.languages.clone(),
                has_punctuation: acc.punct_examples >= required(acc.num_examples),
                has_case: if acc.case_eligible_examples == 0 {
                    None
                } else {
                    Some(acc.cased_examples >= required(acc.case_eligible_examples))
                },
                has_longform: acc.longform,
            })
            .collect()
    }
}

/// One `CorpusStats` row per distinct dataset, sorted by dataset name.
pub fn corpus_stats<'a>(examples: impl IntoIterator<Item = &'a Example>) -> Vec<CorpusStats> {
    let mut acc = StatsAccumulator::new();
    for e in examples {
        acc.add(e);
    }
    acc.finalize(&DetectConfig::default())
}

/// Per-dataset text features: does the target text carry punctuation, and is
/// it case-sensitive (`None` when the languages have no case distinction).
pub fn detect_text_features<'a>(
    examples: impl IntoIterator<Item = &'a Example>,
    config: &DetectConfig,
) -> Vec<(String, bool, Option<bool>)> {
    let mut acc = StatsAccumulator::new();
    for e in examples {
        acc.add(e);
    }
    acc.finalize(config)
        .into_iter()
        .map(|s| (s.dataset, s.has_punctuation, s.has_case))
        .collect()
}
