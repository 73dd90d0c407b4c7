//! Constrained acceptance of LLM punctuation/case restoration.
//!
//! A candidate restoration is aligned word-by-word against the original
//! text; only casing substitutions, punctuation substitutions, and pure
//! punctuation insertions are taken. Everything else — changed, inserted,
//! or dropped words — is suppressed, so the accepted text always carries
//! exactly the original words. A candidate that still differs too much
//! after suppression (residual WER above the threshold) is rejected
//! wholesale and the example left untouched.

use serde::{Deserialize, Serialize};

use crate::align::{align, AlignOp};
use crate::manifest::{Example, Task};
use crate::textnorm::{fold_case, tokenize_with, LanguageRules, MetricUnit, TextRules};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditClass {
    ExactMatch,
    CaseSub,
    PunctSub,
    PunctIns,
    WordChange,
    WordDeletion,
}

impl EditClass {
    pub fn is_accepted(self) -> bool {
        matches!(
            self,
            EditClass::ExactMatch | EditClass::CaseSub | EditClass::PunctSub | EditClass::PunctIns
        )
    }
}

/// Classification of one aligned pair.
#[derive(Debug, Clone)]
pub struct EditDecision {
    pub op: AlignOp,
    pub class: EditClass,
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestoreStatus {
    Accepted,
    /// The candidate still differed from the accepted text by more than the
    /// threshold; nothing was changed.
    RejectedResidual,
    /// Nothing to anchor an alignment on (empty original, nonempty
    /// candidate); nothing was changed.
    RejectedNoChange,
}

/// Result of restoring one text. On any rejected status `applied` is
/// bit-identical to `original`.
#[derive(Debug, Clone)]
pub struct RestorationOutcome {
    pub original: String,
    pub candidate: String,
    pub applied: String,
    pub residual_wer: f64,
    pub status: RestoreStatus,
    pub decisions: Vec<EditDecision>,
}

#[derive(Debug, Clone)]
pub struct RestoreConfig {
    /// Residual WER above which the whole candidate is rejected.
    pub reject_threshold: f64,
    pub text_rules: TextRules,
    pub language_rules: LanguageRules,
}

impl Default for RestoreConfig {
    fn default() -> Self {
        RestoreConfig {
            reject_threshold: 0.30,
            text_rules: TextRules::default(),
            language_rules: LanguageRules::default(),
        }
    }
}

/// Word-align candidate against original (verbatim surfaces) and classify
/// every edit. `case_applies = true` treats fold-equal cores as the same
/// word; languages without case distinction require exact cores.
pub fn classify_edits_with(
    original: &str,
    candidate: &str,
    case_applies: bool,
    rules: &TextRules,
) -> Vec<EditDecision> {
    let ref_tokens = tokenize_with(original, MetricUnit::Word, rules);
    let hyp_tokens = tokenize_with(candidate, MetricUnit::Word, rules);
    let alignment = align(&ref_tokens, &hyp_tokens);

    alignment
        .ops
        .into_iter()
        .map(|op| {
            let class = match &op {
                AlignOp::Match { .. } => EditClass::ExactMatch,
                AlignOp::Sub {
                    ref_token,
                    hyp_token,
                } => {
                    let same_core = if case_applies {
                        fold_case(ref_token.core()) == fold_case(hyp_token.core())
                    } else {
                        ref_token.core() == hyp_token.core()
                    };
                    if !same_core {
                        EditClass::WordChange
                    } else if ref_token.lead_punct() == hyp_token.lead_punct()
                        && ref_token.trail_punct() == hyp_token.trail_punct()
                    {
                        EditClass::CaseSub
                    } else {
                        EditClass::PunctSub
                    }
                }
                AlignOp::Ins { hyp_token } => {
                    if hyp_token.is_pure_punct() {
                        EditClass::PunctIns
                    } else {
                        EditClass::WordChange
                    }
                }
                AlignOp::Del { .. } => EditClass::WordDeletion,
            };
            EditDecision {
                accepted: class.is_accepted(),
                op,
                class,
            }
        })
        .collect()
}

pub fn classify_edits(original: &str, candidate: &str) -> Vec<EditDecision> {
    classify_edits_with(original, candidate, true, &TextRules::default())
}

/// Rebuild the text from the alignment: the candidate token where the edit
/// was accepted, the original token where it was not. Dropped words are
/// retained from the original; the original token order is preserved.
pub fn apply_accepted(decisions: &[EditDecision]) -> String {
    let mut out: Vec<&str> = Vec::with_capacity(decisions.len());
    for d in decisions {
        match &d.op {
            AlignOp::Match { ref_token, .. } => out.push(ref_token.surface()),
            AlignOp::Sub {
                ref_token,
                hyp_token,
            } => out.push(if d.accepted {
                hyp_token.surface()
            } else {
                ref_token.surface()
            }),
            AlignOp::Ins { hyp_token } => {
                if d.accepted {
                    out.push(hyp_token.surface());
                }
            }
            AlignOp::Del { ref_token } => out.push(ref_token.surface()),
        }
    }
    out.join(" ")
}

/// Run the full accept/reject procedure for one text.
pub fn restore_text(
    original: &str,
    candidate: &str,
    case_applies: bool,
    config: &RestoreConfig,
) -> RestorationOutcome {
    let original_tokens = tokenize_with(original, MetricUnit::Word, &config.text_rules);
    let candidate_tokens = tokenize_with(candidate, MetricUnit::Word, &config.text_rules);

    if original_tokens.is_empty() && !candidate_tokens.is_empty() {
        return RestorationOutcome {
            original: original.to_string(),
            candidate: candidate.to_string(),
            applied: original.to_string(),
            residual_wer: 0.0,
            status: RestoreStatus::RejectedNoChange,
            decisions: Vec::new(),
        };
    }

    let decisions = classify_edits_with(original, candidate, case_applies, &config.text_rules);
    let applied = apply_accepted(&decisions);

    // Residual WER: how far the candidate still is from what we accepted,
    // normalized by the accepted text's length.
    let applied_tokens = tokenize_with(&applied, MetricUnit::Word, &config.text_rules);
    let residual = align(&applied_tokens, &candidate_tokens).distance as f64
        / applied_tokens.len().max(1) as f64;

    if residual > config.reject_threshold {
        RestorationOutcome {
            original: original.to_string(),
            candidate: candidate.to_string(),
            applied: original.to_string(),
            residual_wer: residual,
            status: RestoreStatus::RejectedResidual,
            decisions,
        }
    } else {
        RestorationOutcome {
            original: original.to_string(),
            candidate: candidate.to_string(),
            applied,
            residual_wer: residual,
            status: RestoreStatus::Accepted,
            decisions,
        }
    }
}

/// Restore one example's target text. On acceptance the restored text
/// replaces `y_tgt`, and for ASR examples also `y_src` (both sides are the
/// same transcription); on rejection the example comes back unchanged.
pub fn restore_example(
    example: &Example,
    candidate: &str,
    config: &RestoreConfig,
) -> (RestorationOutcome, Example) {
    let case_applies = !config.language_rules.is_caseless(&example.language);
    let outcome = restore_text(&example.y_tgt, candidate, case_applies, config);
    let mut updated = example.clone();
    if outcome.status == RestoreStatus::Accepted {
        updated.y_tgt = outcome.applied.clone();
        if example.task == Task::Asr {
            updated.y_src = outcome.applied.clone();
        }
    }
    (outcome, updated)
}

/// Restore an ST example's source-language transcription from its own
/// candidate. The target side (already punctuated translation) is untouched.
pub fn restore_source(
    example: &Example,
    src_candidate: &str,
    config: &RestoreConfig,
) -> (RestorationOutcome, Example) {
    let case_applies = !config.language_rules.is_caseless(&example.language);
    let outcome = restore_text(&example.y_src, src_candidate, case_applies, config);
    let mut updated = example.clone();
    if outcome.status == RestoreStatus::Accepted {
        updated.y_src = outcome.applied.clone();
    }
    (outcome, updated)
}

/// Re-establish the context chain after restoration: within each recording
/// (ordered by clip start time) every example that carried previous context
/// gets the restored `y_tgt` of its immediate predecessor.
pub fn propagate_context(examples: &mut [Example]) {
    use std::collections::BTreeMap;
    let mut by_recording: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, e) in examples.iter().enumerate() {
        by_recording
            .entry(e.audio.recording_id.clone())
            .or_default()
            .push(i);
    }
    for indices in by_recording.values_mut() {
        indices.sort_by(|&a, &b| {
            examples[a]
                .audio
                .start_sec
                .total_cmp(&examples[b].audio.start_sec)
                .then_with(|| examples[a].id.cmp(&examples[b].id))
        });
        for pair in indices.windows(2) {
            let prev_tgt = examples[pair[0]].y_tgt.clone();
            let next = &mut examples[pair[1]];
            if !next.y_prev.is_empty() && !prev_tgt.is_empty() {
                next.y_prev = prev_tgt;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::{AudioRef, Example, Task};
    use crate::textnorm::{normalize, NormalizationPolicy};

    fn classes(decisions: &[EditDecision]) -> Vec<EditClass> {
        decisions.iter().map(|d| d.class).collect()
    }

    #[test]
    fn classify_restoration_of_clause() {
        let decisions = classify_edits(
            "what years of happiness have been mine o apollo",
            "What years of happiness have been mine, O Apollo,",
        );
        use EditClass::*;
        assert_eq!(
            classes(&decisions),
            vec![
                CaseSub, ExactMatch, ExactMatch, ExactMatch, ExactMatch, ExactMatch, PunctSub,
                CaseSub, PunctSub
            ]
        );
        assert!(!decisions.iter().any(|d| d.class == WordChange));
    }

    #[test]
    fn identical_texts_are_all_exact_matches() {
        let decisions = classify_edits("a plain sentence", "a plain sentence");
        assert!(decisions.iter().all(|d| d.class == EditClass::ExactMatch));
    }

    #[test]
    fn word_change_and_punct_sub() {
        let decisions = classify_edits("the cat sat", "the dog sat.");
        assert_eq!(
            classes(&decisions),
            vec![EditClass::ExactMatch, EditClass::WordChange, EditClass::PunctSub]
        );
        assert_eq!(apply_accepted(&decisions), "the cat sat.");
    }

    #[test]
    fn apply_keeps_identity() {
        let decisions = classify_edits("nothing changes", "nothing changes");
        assert_eq!(apply_accepted(&decisions), "nothing changes");
    }

    #[test]
    fn apply_restores_dropped_words() {
        // The candidate drops the second "he"; word deletions are never
        // accepted, so the original word is retained.
        let decisions = classify_edits(
            "he went toward the god and he made reverence",
            "He went toward the god and made reverence,",
        );
        assert!(decisions.iter().any(|d| d.class == EditClass::WordDeletion));
        assert_eq!(
            apply_accepted(&decisions),
            "He went toward the god and he made reverence,"
        );
    }

    #[test]
    fn punctuation_only_insertion_is_accepted() {
        let decisions = classify_edits("one two", "one — two");
        assert_eq!(
            classes(&decisions),
            vec![EditClass::ExactMatch, EditClass::PunctIns, EditClass::ExactMatch]
        );
        assert_eq!(apply_accepted(&decisions), "one — two");

        let word_ins = classify_edits("one two", "one and two");
        assert_eq!(
            classes(&word_ins),
            vec![EditClass::ExactMatch, EditClass::WordChange, EditClass::ExactMatch]
        );
        assert_eq!(apply_accepted(&word_ins), "one two");
    }

    #[test]
    fn restore_noop_candidate_is_accepted() {
        let config = RestoreConfig::default();
        let outcome = restore_text("the cat sat", "the cat sat", true, &config);
        assert_eq!(outcome.status, RestoreStatus::Accepted);
        assert_eq!(outcome.residual_wer, 0.0);
        assert_eq!(outcome.applied, "the cat sat");
    }

    #[test]
    fn residual_above_threshold_rejects_wholesale() {
        let config = RestoreConfig::default();
        let outcome = restore_text("the cat sat", "the dog sat.", true, &config);
        assert!((outcome.residual_wer - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(outcome.status, RestoreStatus::RejectedResidual);
        assert_eq!(outcome.applied, "the cat sat");
    }

    #[test]
    fn empty_original_rejects_without_change() {
        let config = RestoreConfig::default();
        let outcome = restore_text("", "Hello there.", true, &config);
        assert_eq!(outcome.status, RestoreStatus::RejectedNoChange);
        assert_eq!(outcome.applied, "");

        let both_empty = restore_text("", "", true, &config);
        assert_eq!(both_empty.status, RestoreStatus::Accepted);
        assert_eq!(both_empty.applied, "");
    }

    #[test]
    fn empty_candidate_is_rejected_by_residual() {
        let config = RestoreConfig::default();
        let outcome = restore_text("the cat sat", "", true, &config);
        assert_eq!(outcome.status, RestoreStatus::RejectedResidual);
        assert_eq!(outcome.applied, "the cat sat");
    }

    #[test]
    fn caseless_language_skips_case_subs() {
        let rules = TextRules::default();
        // With case classification off, a case-only substitution is a word
        // change; punctuation substitutions still go through.
        let decisions = classify_edits_with("latin word", "Latin word", false, &rules);
        assert_eq!(decisions[0].class, EditClass::WordChange);
        let decisions = classify_edits_with("你好 世界", "你好， 世界。", false, &rules);
        assert_eq!(
            classes(&decisions),
            vec![EditClass::PunctSub, EditClass::PunctSub]
        );
    }

    fn chained_example(id: &str, rec: &str, start: f64, y_tgt: &str, y_prev: &str) -> Example {
        Example {
            id: id.to_string(),
            dataset: "d".to_string(),
            language: "eng".to_string(),
            task: Task::Asr,
            target_language: None,
            audio: AudioRef {
                recording_id: rec.to_string(),
                start_sec: start,
                end_sec: start + 2.0,
            },
            y_src: y_tgt.to_string(),
            y_tgt: y_tgt.to_string(),
            y_prev: y_prev.to_string(),
            duration_sec: 2.0,
        }
    }

    #[test]
    fn restore_example_updates_src_for_asr() {
        let config = RestoreConfig::default();
        let example = chained_example("a", "r", 0.0, "hello world", "");
        let (outcome, updated) = restore_example(&example, "Hello, world.", &config);
        assert_eq!(outcome.status, RestoreStatus::Accepted);
        assert_eq!(updated.y_tgt, "Hello, world.");
        assert_eq!(updated.y_src, "Hello, world.");
    }

    #[test]
    fn rejected_example_is_bit_identical() {
        let config = RestoreConfig::default();
        let example = chained_example("a", "r", 0.0, "hello world", "");
        let (outcome, updated) = restore_example(&example, "completely different text", &config);
        assert_eq!(outcome.status, RestoreStatus::RejectedResidual);
        assert_eq!(updated, example);
    }

    #[test]
    fn st_examples_keep_target_translation() {
        let config = RestoreConfig::default();
        let mut st = chained_example("a", "r", 0.0, "Bonjour, le monde.", "");
        st.task = Task::St;
        st.target_language = Some("fra".to_string());
        st.y_src = "hello world".to_string();
        let (outcome, updated) = restore_source(&st, "Hello, world.", &config);
        assert_eq!(outcome.status, RestoreStatus::Accepted);
        assert_eq!(updated.y_src, "Hello, world.");
        assert_eq!(updated.y_tgt, "Bonjour, le monde.");
    }

    #[test]
    fn context_chain_is_rewritten() {
        let mut examples = vec![
            chained_example("a", "r", 0.0, "First clip, restored.", ""),
            chained_example("b", "r", 2.0, "second clip", "first clip restored"),
            chained_example("c", "r", 4.0, "third clip", "second clip"),
            chained_example("x", "other", 0.0, "unrelated", ""),
        ];
        propagate_context(&mut examples);
        assert_eq!(examples[0].y_prev, "");
        assert_eq!(examples[1].y_prev, "First clip, restored.");
        assert_eq!(examples[2].y_prev, "second clip");
        assert_eq!(examples[3].y_prev, "");
    }

    #[test]
    fn accepted_text_preserves_words_under_plain_normalization() {
        let config = RestoreConfig::default();
        let cases = [
            ("hello world again", "Hello, world again!"),
            ("it is done", "It is done. Extra words here."),
            ("one two three", "One; two... three?"),
            ("a b c", "A 'b' c,"),
        ];
        let plain = NormalizationPolicy::plain();
        for (original, candidate) in cases {
            let outcome = restore_text(original, candidate, true, &config);
            assert_eq!(
                normalize(&outcome.applied, &plain),
                normalize(original, &plain),
                "word preservation violated for {original:?} / {candidate:?}"
            );
        }
    }
}
