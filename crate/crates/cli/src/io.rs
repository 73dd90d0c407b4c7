//! Line-delimited JSON file helpers shared by the subcommands.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use corpora_core::error::{Error, Result};
use corpora_core::manifest::{Example, TextRecord};

/// Parse every nonempty line of a JSONL file into `T`, with line numbers on
/// errors.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| {
            if e.classify() == serde_json::error::Category::Data {
                Error::Schema {
                    line: idx + 1,
                    message: e.to_string(),
                }
            } else {
                Error::MalformedLine {
                    line: idx + 1,
                    message: e.to_string(),
                    content: line.clone(),
                }
            }
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(&item)
            .map_err(|e| Error::Data(format!("serialization failed: {e}")))?;
        writeln!(writer, "{line}").map_err(|e| Error::io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| Error::io(path, e))
}

/// A reference or hypothesis file in one of the accepted shapes.
pub enum RecordsFile {
    /// Full manifest records.
    Examples(Vec<Example>),
    /// `{id, text}` records.
    Texts(Vec<TextRecord>),
    /// Bare text, one item per line; ids are 1-based line numbers.
    Plain(Vec<String>),
}

impl RecordsFile {
    pub fn has_ids(&self) -> bool {
        !matches!(self, RecordsFile::Plain(_))
    }
}

/// Sniff the file shape from the first nonempty line, then parse the whole
/// file in that shape.
pub fn read_records(path: &Path) -> Result<RecordsFile> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            lines.push(line);
        }
    }
    let Some(first) = lines.first() else {
        return Ok(RecordsFile::Plain(Vec::new()));
    };
    if !first.trim_start().starts_with('{') {
        return Ok(RecordsFile::Plain(lines));
    }
    let probe: serde_json::Value = serde_json::from_str(first).map_err(|e| Error::MalformedLine {
        line: 1,
        message: e.to_string(),
        content: first.clone(),
    })?;
    let is_manifest = probe.get("y_tgt").is_some();
    let parse_line = |idx: usize, line: &str| -> Result<serde_json::Value> {
        serde_json::from_str(line).map_err(|e| Error::MalformedLine {
            line: idx + 1,
            message: e.to_string(),
            content: line.to_string(),
        })
    };
    if is_manifest {
        let mut examples = Vec::with_capacity(lines.len());
        for (idx, line) in lines.iter().enumerate() {
            let value = parse_line(idx, line)?;
            let example: Example =
                serde_json::from_value(value).map_err(|e| Error::Schema {
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            example.validate().map_err(|message| Error::Schema {
                line: idx + 1,
                message,
            })?;
            examples.push(example);
        }
        Ok(RecordsFile::Examples(examples))
    } else {
        let mut texts = Vec::with_capacity(lines.len());
        for (idx, line) in lines.iter().enumerate() {
            let value = parse_line(idx, line)?;
            let record: TextRecord =
                serde_json::from_value(value).map_err(|e| Error::Schema {
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            texts.push(record);
        }
        Ok(RecordsFile::Texts(texts))
    }
}

/// One reference/hypothesis pair ready for scoring.
#[derive(Debug, Clone)]
pub struct ScoredPair {
    pub id: String,
    pub reference: String,
    pub hypothesis: String,
    pub language: String,
}

/// Which manifest field supplies the reference text.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, Serialize, serde::Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum RefField {
    #[default]
    #[value(name = "y-tgt")]
    YTgt,
    #[value(name = "y-src")]
    YSrc,
}

/// Pair references with hypotheses: by id when both files carry ids, by
/// position otherwise (lengths must then match).
pub fn build_pairs(
    refs: &RecordsFile,
    hyps: &RecordsFile,
    ref_field: RefField,
    default_language: &str,
) -> Result<Vec<ScoredPair>> {
    let ref_items: Vec<(String, String, String)> = match refs {
        RecordsFile::Examples(examples) => examples
            .iter()
            .map(|e| {
                let text = match ref_field {
                    RefField::YTgt => e.y_tgt.clone(),
                    RefField::YSrc => e.y_src.clone(),
                };
                (e.id.clone(), text, e.language.clone())
            })
            .collect(),
        RecordsFile::Texts(records) => records
            .iter()
            .map(|r| (r.id.clone(), r.text.clone(), default_language.to_string()))
            .collect(),
        RecordsFile::Plain(lines) => lines
            .iter()
            .enumerate()
            .map(|(i, l)| ((i + 1).to_string(), l.clone(), default_language.to_string()))
            .collect(),
    };

    if refs.has_ids() && hyps.has_ids() {
        let hyp_map: std::collections::BTreeMap<&str, &str> = match hyps {
            RecordsFile::Texts(records) => {
                records.iter().map(|r| (r.id.as_str(), r.text.as_str())).collect()
            }
            RecordsFile::Examples(examples) => {
                examples.iter().map(|e| (e.id.as_str(), e.y_tgt.as_str())).collect()
            }
            RecordsFile::Plain(_) => unreachable!(),
        };
        ref_items
            .into_iter()
            .map(|(id, reference, language)| {
                let hypothesis = hyp_map
                    .get(id.as_str())
                    .ok_or_else(|| Error::Data(format!("no hypothesis for example id {id:?}")))?
                    .to_string();
                Ok(ScoredPair {
                    id,
                    reference,
                    hypothesis,
                    language,
                })
            })
            .collect()
    } else {
        let hyp_texts: Vec<String> = match hyps {
            RecordsFile::Plain(lines) => lines.clone(),
            RecordsFile::Texts(records) => records.iter().map(|r| r.text.clone()).collect(),
            RecordsFile::Examples(examples) => examples.iter().map(|e| e.y_tgt.clone()).collect(),
        };
        if hyp_texts.len() != ref_items.len() {
            return Err(Error::Data(format!(
                "reference and hypothesis files pair by position but differ in length ({} vs {})",
                ref_items.len(),
                hyp_texts.len()
            )));
        }
        Ok(ref_items
            .into_iter()
            .zip(hyp_texts)
            .map(|((id, reference, language), hypothesis)| ScoredPair {
                id,
                reference,
                hypothesis,
                language,
            })
            .collect())
    }
}
