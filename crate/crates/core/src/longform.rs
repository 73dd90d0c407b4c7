//! Long-form splicing: pack consecutive short clips of one recording into
//! long-form training examples, flag windows that contain untranscribed
//! speech or unexplained gaps, and compare error rates between systems on
//! the resulting subsets.

use serde::{Deserialize, Serialize};

use crate::align::ErrorRates;
use crate::error::{Error, Result};
use crate::manifest::{AudioRef, Example, Task};

/// One timed span of a recording. `text: None` marks a clip that is known
/// to contain speech but has no transcription.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub start_sec: f64,
    pub end_sec: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.end_sec - self.start_sec
    }
}

/// Ordered, non-overlapping segments of one recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentTimeline {
    pub recording_id: String,
    pub dataset: String,
    pub language: String,
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, Copy)]
pub struct SpliceConfig {
    /// Maximum span (first clip start to last clip end) of one long-form
    /// example.
    pub max_duration_sec: f64,
    /// Silence between consecutive included clips longer than this marks the
    /// example dirty even without an explicit untranscribed segment.
    pub gap_tolerance_sec: f64,
    /// Slack allowed when checking that segments do not overlap.
    pub overlap_tolerance_sec: f64,
}

impl Default for SpliceConfig {
    fn default() -> Self {
        SpliceConfig {
            max_duration_sec: 30.0,
            gap_tolerance_sec: 0.5,
            overlap_tolerance_sec: 0.01,
        }
    }
}

/// A spliced example plus its provenance and alignment-health flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongFormExample {
    #[serde(flatten)]
    pub example: Example,
    pub clip_ids: Vec<String>,
    /// True iff no untranscribed segment intersects the window and every gap
    /// between consecutive included clips is within tolerance.
    pub clean: bool,
    /// A single clip longer than the window limit, emitted on its own.
    pub oversize: bool,
}

impl SegmentTimeline {
    pub fn validate(&self, config: &SpliceConfig) -> Result<()> {
        if self.recording_id.is_empty() {
            return Err(Error::Data("timeline recording_id must be nonempty".into()));
        }
        for (i, seg) in self.segments.iter().enumerate() {
            if !seg.start_sec.is_finite()
                || !seg.end_sec.is_finite()
                || seg.end_sec <= seg.start_sec
                || seg.start_sec < 0.0
            {
                return Err(Error::Data(format!(
                    "recording {:?} segment {i}: invalid span [{}, {}]",
                    self.recording_id, seg.start_sec, seg.end_sec
                )));
            }
            if seg.text.as_ref().is_some_and(|t| t.trim().is_empty()) {
                return Err(Error::Data(format!(
                    "recording {:?} segment {i}: transcribed segment with blank text \
                     (omit `text` to mark it untranscribed)",
                    self.recording_id
                )));
            }
            if i > 0 {
                let prev = &self.segments[i - 1];
                if seg.start_sec < prev.start_sec {
                    return Err(Error::Data(format!(
                        "recording {:?} segment {i}: segments not sorted by start_sec",
                        self.recording_id
                    )));
                }
                if prev.end_sec > seg.start_sec + config.overlap_tolerance_sec {
                    return Err(Error::Data(format!(
                        "recording {:?} segment {i}: overlaps previous segment \
                         ({} > {})",
                        self.recording_id, prev.end_sec, seg.start_sec
                    )));
                }
            }
        }
        Ok(())
    }

    fn clip_id(&self, index: usize) -> String {
        self.segments[index]
            .id
            .clone()
            .unwrap_or_else(|| format!("{}:{index}", self.recording_id))
    }
}

/// Greedy packing: keep extending the current window with the next
/// transcribed clip while the total span stays within the limit. Every
/// transcribed clip lands in exactly one output example.
pub fn splice(timeline: &SegmentTimeline, config: &SpliceConfig) -> Result<Vec<LongFormExample>> {
    timeline.validate(config)?;
    let transcribed: Vec<usize> = timeline
        .segments
        .iter()
        .enumerate()
        .filter(|(_, s)| s.text.is_some())
        .map(|(i, _)| i)
        .collect();

    let mut windows: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    for &idx in &transcribed {
        let seg = &timeline.segments[idx];
        match current.first() {
            None => current.push(idx),
            Some(&first) => {
                let span = seg.end_sec - timeline.segments[first].start_sec;
                if span <= config.max_duration_sec {
                    current.push(idx);
                } else {
                    windows.push(std::mem::take(&mut current));
                    current.push(idx);
                }
            }
        }
    }
    if !current.is_empty() {
        windows.push(current);
    }

    let mut out = Vec::with_capacity(windows.len());
    let mut prev_text = String::new();
    for (window_no, window) in windows.iter().enumerate() {
        let start = timeline.segments[window[0]].start_sec;
        let end = timeline.segments[*window.last().unwrap()].end_sec;
        let text = window
            .iter()
            .map(|&i| timeline.segments[i].text.as_deref().unwrap())
            .collect::<Vec<_>>()
            .join(" ");

        let mut clean = true;
        for pair in window.windows(2) {
            let gap = timeline.segments[pair[1]].start_sec - timeline.segments[pair[0]].end_sec;
            if gap > config.gap_tolerance_sec {
                clean = false;
            }
        }
        let intersects_untranscribed = timeline.segments.iter().any(|s| {
            s.text.is_none() && s.start_sec < end && s.end_sec > start
        });
        clean &= !intersects_untranscribed;

        let oversize =
            window.len() == 1 && timeline.segments[window[0]].duration() > config.max_duration_sec;

        let example = Example {
            id: format!("{}-lf{window_no:04}", timeline.recording_id),
            dataset: timeline.dataset.clone(),
            language: timeline.language.clone(),
            task: Task::Asr,
            target_language: None,
            audio: AudioRef {
                recording_id: timeline.recording_id.clone(),
                start_sec: start,
                end_sec: end,
            },
            y_src: text.clone(),
            y_tgt: text.clone(),
            y_prev: prev_text.clone(),
            duration_sec: end - start,
        };
        prev_text = text;

        out.push(LongFormExample {
            example,
            clip_ids: window.iter().map(|&i| timeline.clip_id(i)).collect(),
            clean,
            oversize,
        });
    }
    Ok(out)
}

/// Exactly the examples free of untranscribed content and unexplained gaps.
pub fn clean_subset(examples: &[LongFormExample]) -> Vec<LongFormExample> {
    examples.iter().filter(|e| e.clean).cloned().collect()
}

/// Total and deletion rates of one system on one subset, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub total_pct: f64,
    pub deletion_pct: f64,
}

impl From<&ErrorRates> for RateSummary {
    fn from(rates: &ErrorRates) -> Self {
        RateSummary {
            total_pct: rates.total() * 100.0,
            deletion_pct: rates.del_rate() * 100.0,
        }
    }
}

/// Signed relative change in percent: negative when `updated` improves on
/// `baseline`. `None` when the baseline is zero and the change undefined.
pub fn relative_change_pct(baseline: f64, updated: f64) -> Option<f64> {
    if baseline == 0.0 {
        if updated == 0.0 {
            Some(0.0)
        } else {
            None
        }
    } else {
        Some((updated - baseline) / baseline * 100.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeletionReportRow {
    pub subset: String,
    pub baseline: RateSummary,
    pub updated: RateSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeletionReportLine {
    pub subset: String,
    pub baseline: RateSummary,
    pub updated: RateSummary,
    pub total_change_pct: Option<f64>,
    pub deletion_change_pct: Option<f64>,
}

/// Per-subset totals and deletion rates with their relative changes between
/// two systems.
pub fn deletion_report(rows: &[DeletionReportRow]) -> Vec<DeletionReportLine> {
    rows.iter()
        .map(|row| DeletionReportLine {
            subset: row.subset.clone(),
            baseline: row.baseline,
            updated: row.updated,
            total_change_pct: relative_change_pct(row.baseline.total_pct, row.updated.total_pct),
            deletion_change_pct: relative_change_pct(
                row.baseline.deletion_pct,
                row.updated.deletion_pct,
            ),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(start: f64, end: f64, text: Option<&str>) -> Segment {
        Segment {
            id: None,
            start_sec: start,
            end_sec: end,
            text: text.map(|t| t.to_string()),
        }
    }

    fn timeline(segments: Vec<Segment>) -> SegmentTimeline {
        SegmentTimeline {
            recording_id: "rec1".to_string(),
            dataset: "toy".to_string(),
            language: "eng".to_string(),
            segments,
        }
    }

    #[test]
    fn splice_two_adjacent_clips() {
        let tl = timeline(vec![seg(0.0, 2.0, Some("a")), seg(2.0, 5.0, Some("b"))]);
        let out = splice(&tl, &SpliceConfig::default()).unwrap();
        assert_eq!(out.len(), 1);
        let lf = &out[0];
        assert_eq!(lf.example.y_tgt, "a b");
        assert_eq!(lf.example.duration_sec, 5.0);
        assert!(lf.clean);
        assert!(!lf.oversize);
        assert_eq!(lf.clip_ids, vec!["rec1:0", "rec1:1"]);
    }

    #[test]
    fn untranscribed_clip_inside_window_marks_dirty() {
        let tl = timeline(vec![
            seg(0.0, 2.0, Some("a")),
            seg(2.0, 4.0, None),
            seg(4.0, 6.0, Some("b")),
        ]);
        let out = splice(&tl, &SpliceConfig::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].example.y_tgt, "a b");
        assert_eq!(out[0].example.audio.start_sec, 0.0);
        assert_eq!(out[0].example.audio.end_sec, 6.0);
        assert!(!out[0].clean);
    }

    #[test]
    fn oversize_single_clip_is_kept_and_flagged() {
        let tl = timeline(vec![seg(0.0, 40.0, Some("long monologue"))]);
        let out = splice(&tl, &SpliceConfig::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].oversize);
        assert_eq!(out[0].example.duration_sec, 40.0);
    }

    #[test]
    fn windows_break_at_max_duration() {
        let tl = timeline(vec![
            seg(0.0, 10.0, Some("one")),
            seg(10.0, 20.0, Some("two")),
            seg(20.0, 30.0, Some("three")),
            seg(30.0, 40.0, Some("four")),
        ]);
        let out = splice(&tl, &SpliceConfig::default()).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].example.y_tgt, "one two three");
        assert_eq!(out[1].example.y_tgt, "four");
        // Context chains through consecutive windows of a recording.
        assert_eq!(out[0].example.y_prev, "");
        assert_eq!(out[1].example.y_prev, "one two three");
    }

    #[test]
    fn unexplained_gap_marks_dirty() {
        let tl = timeline(vec![seg(0.0, 2.0, Some("a")), seg(4.0, 6.0, Some("b"))]);
        let out = splice(&tl, &SpliceConfig::default()).unwrap();
        assert!(!out[0].clean);

        let small_gap = timeline(vec![seg(0.0, 2.0, Some("a")), seg(2.3, 4.0, Some("b"))]);
        let out = splice(&small_gap, &SpliceConfig::default()).unwrap();
        assert!(out[0].clean);
    }

    #[test]
    fn untranscribed_outside_window_is_harmless() {
        let tl = timeline(vec![
            seg(0.0, 2.0, Some("a")),
            seg(2.0, 4.0, Some("b")),
            seg(50.0, 60.0, None),
        ]);
        let out = splice(&tl, &SpliceConfig::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].clean);
    }

    #[test]
    fn clean_subset_filters() {
        let tl = timeline(vec![
            seg(0.0, 2.0, Some("a")),
            seg(2.0, 4.0, None),
            seg(4.0, 6.0, Some("b")),
        ]);
        let out = splice(&tl, &SpliceConfig::default()).unwrap();
        assert!(clean_subset(&out).is_empty());

        let ok = splice(
            &timeline(vec![seg(0.0, 2.0, Some("a"))]),
            &SpliceConfig::default(),
        )
        .unwrap();
        assert_eq!(clean_subset(&ok).len(), 1);
        assert!(clean_subset(&[]).is_empty());
    }

    #[test]
    fn every_transcribed_clip_lands_exactly_once() {
        let tl = timeline(vec![
            seg(0.0, 12.0, Some("one")),
            seg(12.0, 25.0, Some("two")),
            seg(25.0, 29.0, None),
            seg(29.0, 45.0, Some("three")),
            seg(45.0, 80.0, Some("four")),
        ]);
        let out = splice(&tl, &SpliceConfig::default()).unwrap();
        let mut all_clips: Vec<String> = out.iter().flat_map(|e| e.clip_ids.clone()).collect();
        all_clips.sort();
        assert_eq!(all_clips, vec!["rec1:0", "rec1:1", "rec1:3", "rec1:4"]);
        for lf in &out {
            let joined = lf
                .clip_ids
                .iter()
                .map(|id| {
                    let idx: usize = id.split(':').nth(1).unwrap().parse().unwrap();
                    tl.segments[idx].text.clone().unwrap()
                })
                .collect::<Vec<_>>()
                .join(" ");
            assert_eq!(joined, lf.example.y_tgt);
        }
    }

    #[test]
    fn validation_rejects_bad_timelines() {
        let overlapping = timeline(vec![seg(0.0, 3.0, Some("a")), seg(2.0, 5.0, Some("b"))]);
        assert!(splice(&overlapping, &SpliceConfig::default()).is_err());

        let unsorted = timeline(vec![seg(5.0, 6.0, Some("a")), seg(0.0, 1.0, Some("b"))]);
        assert!(splice(&unsorted, &SpliceConfig::default()).is_err());

        let blank = timeline(vec![seg(0.0, 1.0, Some("  "))]);
        assert!(splice(&blank, &SpliceConfig::default()).is_err());
    }

    #[test]
    fn identical_systems_show_zero_change() {
        let row = DeletionReportRow {
            subset: "test".to_string(),
            baseline: RateSummary {
                total_pct: 12.7,
                deletion_pct: 3.8,
            },
            updated: RateSummary {
                total_pct: 12.7,
                deletion_pct: 3.8,
            },
        };
        let lines = deletion_report(&[row]);
        assert_eq!(lines[0].total_change_pct, Some(0.0));
        assert_eq!(lines[0].deletion_change_pct, Some(0.0));
    }

    #[test]
    fn relative_reduction_arithmetic() {
        let row = DeletionReportRow {
            subset: "longform".to_string(),
            baseline: RateSummary {
                total_pct: 17.8,
                deletion_pct: 9.3,
            },
            updated: RateSummary {
                total_pct: 13.9,
                deletion_pct: 3.7,
            },
        };
        let lines = deletion_report(&[row]);
        let total = lines[0].total_change_pct.unwrap();
        assert!((total - (-21.9)).abs() < 0.15, "total change {total}");
        // Deletion change computed from the rates as given; inputs rounded
        // to one decimal land at -60.2.
        let del = lines[0].deletion_change_pct.unwrap();
        assert!((del - (-60.215)).abs() < 0.01, "deletion change {del}");
    }

    #[test]
    fn zero_baseline_changes_are_flagged_undefined() {
        assert_eq!(relative_change_pct(0.0, 0.0), Some(0.0));
        assert_eq!(relative_change_pct(0.0, 1.0), None);
        let up = relative_change_pct(0.3, 0.4).unwrap();
        assert!((up - 33.333).abs() < 0.01);
    }
}
