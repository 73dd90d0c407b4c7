//! Deterministic synthetic corpora with known ground truth.

use std::collections::BTreeSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use corpora_core::manifest::{AudioRef, Example, Task, TextRecord};
use corpora_core::longform::{Segment, SegmentTimeline};

/// Lowercase vocabulary free of the sentinel letters used for corruption.
pub const VOCAB: &[&str] = &[
    "alpha", "beta", "gamma", "delta", "omega", "hello", "world", "river", "stone", "cloud",
    "amber", "forest", "silver", "night", "dream", "music", "garden", "winter", "candle", "mirror",
    "meadow", "ember", "hollow", "spring", "lantern", "velvet", "willow", "harbor",
];

const ZH_VOCAB: &[&str] = &["你好", "世界", "语音", "数据", "模型", "训练", "文本", "标点"];

/// Sentinel characters guaranteed absent from the vocabularies, so corrupted
/// hypotheses keep a provable distance from their references.
const ENG_SENTINEL: char = 'q';
const ZH_SENTINEL: char = '〇';

pub struct ToyCorpus {
    pub examples: Vec<Example>,
    pub hypotheses: Vec<TextRecord>,
    pub timelines: Vec<SegmentTimeline>,
    /// Ids whose hypotheses were corrupted; their CER is at least 0.4 while
    /// every clean example stays at or below 0.125, so a discard cut of
    /// exactly `noise_fraction` separates the two groups.
    pub noisy_ids: BTreeSet<String>,
}

fn sentence<R: Rng>(rng: &mut R, vocab: &[&str]) -> String {
    let len = rng.random_range(4..=9);
    (0..len)
        .map(|_| vocab[rng.random_range(0..vocab.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

/// Replace every other non-whitespace character with a sentinel the
/// vocabulary never uses: at least half the characters must then be edited,
/// so the char-level error rate is at least 0.4 whatever the alignment.
fn corrupt(text: &str, sentinel: char) -> String {
    let mut position = 0usize;
    text.chars()
        .map(|c| {
            if c.is_whitespace() {
                c
            } else {
                position += 1;
                if position % 2 == 1 {
                    sentinel
                } else {
                    c
                }
            }
        })
        .collect()
}

/// Substitute exactly one character, for a provably tiny nonzero CER.
fn one_char_edit(text: &str, sentinel: char) -> String {
    let mut done = false;
    text.chars()
        .map(|c| {
            if !done && !c.is_whitespace() {
                done = true;
                sentinel
            } else {
                c
            }
        })
        .collect()
}

/// Build a single-dataset corpus of `n` examples where exactly
/// `round(n * noise_fraction)` hypotheses are heavily corrupted. Examples
/// chain into multi-clip recordings so context propagation and long-form
/// detection have something to chew on.
pub fn toy_corpus(seed: u64, n: usize, noise_fraction: f64) -> ToyCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noisy_count = (n as f64 * noise_fraction).round() as usize;
    let noisy_indices: BTreeSet<usize> = rand::seq::index::sample(&mut rng, n, noisy_count)
        .into_iter()
        .collect();

    let mut examples = Vec::with_capacity(n);
    let mut hypotheses = Vec::with_capacity(n);
    let mut noisy_ids = BTreeSet::new();

    let mut i = 0;
    let mut recording_no = 0;
    while i < n {
        let chain_len = rng.random_range(1..=3).min(n - i);
        let recording_id = format!("toyrec{recording_no:04}");
        recording_no += 1;
        let zho = rng.random_bool(0.15);
        let (vocab, sentinel, language) = if zho {
            (ZH_VOCAB, ZH_SENTINEL, "zho")
        } else {
            (VOCAB, ENG_SENTINEL, "eng")
        };

        let mut cursor = 0.0;
        let mut prev_text = String::new();
        for _ in 0..chain_len {
            let id = format!("toy{i:06}");
            let text = sentence(&mut rng, vocab);
            let duration = 2.0 + rng.random_range(0..600) as f64 / 100.0;
            let hyp = if noisy_indices.contains(&i) {
                noisy_ids.insert(id.clone());
                corrupt(&text, sentinel)
            } else if rng.random_bool(0.3) {
                one_char_edit(&text, sentinel)
            } else {
                text.clone()
            };
            examples.push(Example {
                id: id.clone(),
                dataset: "toy".to_string(),
                language: language.to_string(),
                task: Task::Asr,
                target_language: None,
                audio: AudioRef {
                    recording_id: recording_id.clone(),
                    start_sec: cursor,
                    end_sec: cursor + duration,
                },
                y_src: text.clone(),
                y_tgt: text.clone(),
                y_prev: prev_text.clone(),
                duration_sec: duration,
            });
            hypotheses.push(TextRecord { id, text: hyp });
            prev_text = text;
            cursor += duration;
            i += 1;
        }
    }

    let timelines = (0..10)
        .map(|t| random_timeline(&mut rng, &format!("toytl{t:03}"), "toy", "eng"))
        .collect();

    ToyCorpus {
        examples,
        hypotheses,
        timelines,
        noisy_ids,
    }
}

/// A random well-formed timeline: sorted, non-overlapping segments with a
/// mix of tight joins, small and large gaps, and untranscribed spans.
pub fn random_timeline<R: Rng>(
    rng: &mut R,
    recording_id: &str,
    dataset: &str,
    language: &str,
) -> SegmentTimeline {
    let count = rng.random_range(2..=8);
    let mut cursor = 0.0;
    let mut segments = Vec::with_capacity(count);
    for s in 0..count {
        let gap = match rng.random_range(0..10) {
            0..=6 => 0.0,
            7 => rng.random_range(0..40) as f64 / 100.0,
            _ => 1.0 + rng.random_range(0..200) as f64 / 100.0,
        };
        cursor += gap;
        let duration = 1.0 + rng.random_range(0..900) as f64 / 100.0;
        let untranscribed = rng.random_bool(0.2);
        segments.push(Segment {
            id: Some(format!("{recording_id}-c{s}")),
            start_sec: cursor,
            end_sec: cursor + duration,
            text: if untranscribed {
                None
            } else {
                Some(sentence(rng, VOCAB))
            },
        });
        cursor += duration;
    }
    SegmentTimeline {
        recording_id: recording_id.to_string(),
        dataset: dataset.to_string(),
        language: language.to_string(),
        segments,
    }
}

/// Random LLM-style candidate: case flips, punctuation attachment and
/// insertion, word swaps, insertions, and occasional drops.
pub fn mutate_candidate<R: Rng>(rng: &mut R, original: &str) -> String {
    const LEAD: &[&str] = &["'", "\"", "("];
    const TRAIL: &[&str] = &[".", ",", "!", "?", ";", ":", ",'", "?'"];
    const PUNCT_TOKENS: &[&str] = &["—", "...", ","];

    let mut out: Vec<String> = Vec::new();
    for word in original.split_whitespace() {
        let roll: f64 = rng.random();
        if roll < 0.25 {
            // Case flip: capitalize or shout.
            if rng.random_bool(0.8) {
                let mut chars = word.chars();
                let first: String = chars
                    .next()
                    .map(|c| c.to_uppercase().collect())
                    .unwrap_or_default();
                out.push(format!("{first}{}", chars.as_str()));
            } else {
                out.push(word.to_uppercase());
            }
        } else if roll < 0.45 {
            // Punctuation attachment, possibly with a case flip.
            let mut surface = word.to_string();
            if rng.random_bool(0.3) {
                surface = format!("{}{surface}", LEAD[rng.random_range(0..LEAD.len())]);
            }
            if rng.random_bool(0.9) {
                surface = format!("{surface}{}", TRAIL[rng.random_range(0..TRAIL.len())]);
            }
            if rng.random_bool(0.3) {
                let mut chars = surface.chars();
                let first: String = chars
                    .next()
                    .map(|c| c.to_uppercase().collect())
                    .unwrap_or_default();
                surface = format!("{first}{}", chars.as_str());
            }
            out.push(surface);
        } else if roll < 0.55 {
            // Word swap.
            let replacement = VOCAB[rng.random_range(0..VOCAB.len())];
            out.push(replacement.to_string());
        } else if roll < 0.62 {
            // Dropped word.
        } else {
            out.push(word.to_string());
        }
        if rng.random_bool(0.08) {
            out.push(VOCAB[rng.random_range(0..VOCAB.len())].to_string());
        }
        if rng.random_bool(0.08) {
            out.push(PUNCT_TOKENS[rng.random_range(0..PUNCT_TOKENS.len())].to_string());
        }
    }
    out.join(" ")
}

/// Random token list over a small alphabet, for alignment fuzzing.
pub fn random_token_list<R: Rng>(rng: &mut R, max_len: usize, alphabet: usize) -> Vec<String> {
    let len = rng.random_range(0..=max_len);
    (0..len)
        .map(|_| {
            let c = (b'a' + rng.random_range(0..alphabet) as u8) as char;
            c.to_string()
        })
        .collect()
}

/// Write anything serializable as one JSON object per line.
pub fn write_jsonl<T: serde::Serialize>(
    path: impl AsRef<Path>,
    items: impl IntoIterator<Item = T>,
) -> std::io::Result<()> {
    use std::io::Write;
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for item in items {
        writeln!(file, "{}", serde_json::to_string(&item).expect("serializable"))?;
    }
    Ok(())
}
