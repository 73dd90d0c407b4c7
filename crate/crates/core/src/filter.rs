//! Example-level quality filtering: rank examples by the character error
//! rate of a seed model's hypotheses against their own labels, discard the
//! worst k%, group languages for proxy experiments, and draw proxy-task
//! samples.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Filtering policy. `per_dataset_overrides` replaces the global `k_percent`
/// for datasets whose alignment quality warrants a heavier cut; the defaults
/// carry the tuned per-corpus choices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterConfig {
    pub k_percent: f64,
    pub group_size: usize,
    pub proxy_n: u64,
    pub seed: u64,
    pub per_dataset_overrides: BTreeMap<String, f64>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        let overrides = [
            ("LibriSpeech", 15.0),
            ("GigaSpeech", 35.0),
            ("WenetSpeech", 45.0),
            ("GigaST", 35.0),
        ]
        .into_iter()
        .map(|(d, k)| (d.to_string(), k))
        .collect();
        FilterConfig {
            k_percent: 5.0,
            group_size: 5,
            proxy_n: 50_000,
            seed: 0,
            per_dataset_overrides: overrides,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        validate_k(self.k_percent)?;
        for (dataset, &k) in &self.per_dataset_overrides {
            validate_k(k).map_err(|_| {
                Error::Config(format!(
                    "k override for dataset {dataset:?} must be in [0, 100], got {k}"
                ))
            })?;
        }
        if self.group_size == 0 {
            return Err(Error::Config("group_size must be at least 1".into()));
        }
        if self.proxy_n == 0 {
            return Err(Error::Config("proxy_n must be at least 1".into()));
        }
        Ok(())
    }

    /// Effective discard percentage for a dataset.
    pub fn k_for(&self, dataset: &str) -> f64 {
        self.per_dataset_overrides
            .get(dataset)
            .copied()
            .unwrap_or(self.k_percent)
    }
}

fn validate_k(k: f64) -> Result<()> {
    if !(0.0..=100.0).contains(&k) || k.is_nan() {
        return Err(Error::Config(format!(
            "k_percent must be in [0, 100], got {k}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Keep,
    Discard,
}

/// Outcome for one scored example. `rank` is 1-based with 1 = worst CER
/// under the deterministic sort order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub example_id: String,
    pub cer: f64,
    pub rank: u64,
    pub verdict: Verdict,
}

/// Number of examples discarded out of `n` at `k_percent`.
pub fn discard_count(n: usize, k_percent: f64) -> usize {
    (n as f64 * k_percent / 100.0).floor() as usize
}

fn sorted_by_rank(scored: &[(String, f64)]) -> Result<Vec<(String, f64)>> {
    for (id, cer) in scored {
        if !cer.is_finite() || *cer < 0.0 {
            return Err(Error::Data(format!(
                "cer for example {id:?} must be a nonnegative number, got {cer}"
            )));
        }
    }
    let mut sorted = scored.to_vec();
    // Worst CER first; ties broken by ascending id so reruns and shuffled
    // inputs produce identical verdicts.
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(sorted)
}

/// Sort by descending CER and discard the top `floor(n * k / 100)` examples.
/// Returns decisions in rank order.
pub fn rank_and_discard(scored: &[(String, f64)], k_percent: f64) -> Result<Vec<FilterDecision>> {
    validate_k(k_percent)?;
    let sorted = sorted_by_rank(scored)?;
    let cut = discard_count(sorted.len(), k_percent);
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(idx, (example_id, cer))| FilterDecision {
            example_id,
            cer,
            rank: idx as u64 + 1,
            verdict: if idx < cut {
                Verdict::Discard
            } else {
                Verdict::Keep
            },
        })
        .collect())
}

/// Duration-based variant: discard worst-CER examples while the discarded
/// duration stays within k% of the total duration. Same sort order as
/// [`rank_and_discard`].
pub fn rank_and_discard_by_duration(
    scored: &[(String, f64, f64)],
    k_percent: f64,
) -> Result<Vec<FilterDecision>> {
    validate_k(k_percent)?;
    let ids: Vec<(String, f64)> = scored.iter().map(|(id, cer, _)| (id.clone(), *cer)).collect();
    let durations: BTreeMap<&str, f64> = scored
        .iter()
        .map(|(id, _, dur)| (id.as_str(), *dur))
        .collect();
    let total: f64 = scored.iter().map(|(_, _, dur)| dur).sum();
    let budget = total * k_percent / 100.0;
    let sorted = sorted_by_rank(&ids)?;
    let mut spent = 0.0;
    let mut decisions = Vec::with_capacity(sorted.len());
    let mut discarding = true;
    for (idx, (example_id, cer)) in sorted.into_iter().enumerate() {
        let dur = durations.get(example_id.as_str()).copied().unwrap_or(0.0);
        let verdict = if discarding && spent + dur <= budget + 1e-9 {
            spent += dur;
            Verdict::Discard
        } else {
            discarding = false;
            Verdict::Keep
        };
        decisions.push(FilterDecision {
            example_id,
            cer,
            rank: idx as u64 + 1,
            verdict,
        });
    }
    Ok(decisions)
}

/// Chunk languages into consecutive groups of `group_size` after sorting by
/// ascending mean CER (ties by language code). The final group may be short.
pub fn group_languages(
    per_language_mean_cer: &BTreeMap<String, f64>,
    group_size: usize,
) -> Vec<Vec<String>> {
    assert!(group_size >= 1, "group_size must be at least 1");
    let mut langs: Vec<(&String, f64)> = per_language_mean_cer
        .iter()
        .map(|(l, &c)| (l, c))
        .collect();
    langs.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
    langs
        .chunks(group_size)
        .map(|chunk| chunk.iter().map(|(l, _)| (*l).clone()).collect())
        .collect()
}

/// Uniform sample (without replacement) of `min(round(N * (1 - k/100)),
/// |kept|)` example ids. Deterministic for a given seed and kept set,
/// independent of input order; output sorted by id.
pub fn proxy_sample(kept: &[String], k_percent: f64, n: u64, seed: u64) -> Vec<String> {
    let target = (n as f64 * (1.0 - k_percent / 100.0)).round() as usize;
    let amount = target.min(kept.len());
    let mut pool: Vec<&String> = kept.iter().collect();
    pool.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<String> = rand::seq::index::sample(&mut rng, pool.len(), amount)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect();
    picked.sort();
    picked
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scored(n: usize) -> Vec<(String, f64)> {
        (0..n)
            .map(|i| (format!("id{i:04}"), (i as f64 * 7.3) % 1.0))
            .collect()
    }

    #[test]
    fn discards_exactly_the_worst_five_of_hundred() {
        let entries = scored(100);
        let decisions = rank_and_discard(&entries, 5.0).unwrap();
        let discarded: Vec<&FilterDecision> =
            decisions.iter().filter(|d| d.verdict == Verdict::Discard).collect();
        assert_eq!(discarded.len(), 5);
        let min_discarded = discarded.iter().map(|d| d.cer).fold(f64::INFINITY, f64::min);
        let max_kept = decisions
            .iter()
            .filter(|d| d.verdict == Verdict::Keep)
            .map(|d| d.cer)
            .fold(0.0, f64::max);
        assert!(min_discarded >= max_kept);
    }

    #[test]
    fn k_zero_keeps_everything() {
        let entries = scored(10);
        let decisions = rank_and_discard(&entries, 0.0).unwrap();
        assert!(decisions.iter().all(|d| d.verdict == Verdict::Keep));
        assert_eq!(decisions.len(), 10);
    }

    #[test]
    fn ties_discard_smallest_ids_first() {
        let entries: Vec<(String, f64)> =
            (0..10).map(|i| (format!("id{i}"), 0.5)).collect();
        let decisions = rank_and_discard(&entries, 20.0).unwrap();
        let discarded: Vec<&str> = decisions
            .iter()
            .filter(|d| d.verdict == Verdict::Discard)
            .map(|d| d.example_id.as_str())
            .collect();
        assert_eq!(discarded, vec!["id0", "id1"]);
    }

    #[test]
    fn k_out_of_range_is_config_error() {
        assert!(matches!(
            rank_and_discard(&scored(3), 101.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            rank_and_discard(&scored(3), -0.5),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn nan_cer_is_data_error() {
        let entries = vec![("a".to_string(), f64::NAN)];
        assert!(matches!(rank_and_discard(&entries, 5.0), Err(Error::Data(_))));
    }

    #[test]
    fn default_overrides_match_tuned_choices() {
        let config = FilterConfig::default();
        assert_eq!(config.k_for("LibriSpeech"), 15.0);
        assert_eq!(config.k_for("GigaSpeech"), 35.0);
        assert_eq!(config.k_for("WenetSpeech"), 45.0);
        assert_eq!(config.k_for("GigaST"), 35.0);
        assert_eq!(config.k_for("CommonVoice"), 5.0);
        config.validate().unwrap();
    }

    #[test]
    fn groups_chunk_consecutively() {
        let cer: BTreeMap<String, f64> = (0..10)
            .map(|i| (format!("l{i}"), i as f64))
            .collect();
        let groups = group_languages(&cer, 5);
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0], vec!["l0", "l1", "l2", "l3", "l4"]);
        assert_eq!(groups[1], vec!["l5", "l6", "l7", "l8", "l9"]);

        let cer7: BTreeMap<String, f64> = (0..7).map(|i| (format!("l{i}"), i as f64)).collect();
        let groups = group_languages(&cer7, 5);
        assert_eq!(groups[0].len(), 5);
        assert_eq!(groups[1].len(), 2);
    }

    #[test]
    fn commonvoice_style_grouping() {
        let cer: BTreeMap<String, f64> = [
            ("bel", 5.1),
            ("rus", 9.9),
            ("nld", 12.8),
            ("fas", 16.2),
            ("pol", 18.8),
            ("ind", 22.6),
            ("uig", 24.9),
            ("ukr", 27.1),
            ("kmr", 32.0),
            ("urd", 38.7),
            ("lav", 58.7),
        ]
        .into_iter()
        .map(|(l, c)| (l.to_string(), c))
        .collect();
        let groups = group_languages(&cer, 5);
        assert_eq!(groups[0], vec!["bel", "rus", "nld", "fas", "pol"]);
        assert_eq!(groups.len(), 3);
        assert_eq!(groups[2], vec!["lav"]);
    }

    #[test]
    fn proxy_sample_hits_target_size() {
        let kept: Vec<String> = (0..48_000).map(|i| format!("id{i:06}")).collect();
        let sample = proxy_sample(&kept, 5.0, 50_000, 7);
        assert_eq!(sample.len(), 47_500);
        let mut sorted = sample.clone();
        sorted.sort();
        assert_eq!(sample, sorted);
    }

    #[test]
    fn proxy_sample_saturates() {
        let kept: Vec<String> = (0..10).map(|i| format!("id{i}")).collect();
        let sample = proxy_sample(&kept, 5.0, 50_000, 7);
        let mut expected = kept.clone();
        expected.sort();
        assert_eq!(sample, expected);
    }

    #[test]
    fn proxy_sample_is_deterministic() {
        let kept: Vec<String> = (0..1000).map(|i| format!("id{i:04}")).collect();
        let a = proxy_sample(&kept, 5.0, 600, 42);
        let b = proxy_sample(&kept, 5.0, 600, 42);
        assert_eq!(a, b);
        let mut shuffled = kept.clone();
        shuffled.reverse();
        let c = proxy_sample(&shuffled, 5.0, 600, 42);
        assert_eq!(a, c);
        let d = proxy_sample(&kept, 5.0, 600, 43);
        assert_ne!(a, d);
    }

    #[test]
    fn duration_based_discard_respects_budget() {
        let entries = vec![
            ("a".to_string(), 0.9, 10.0),
            ("b".to_string(), 0.8, 10.0),
            ("c".to_string(), 0.2, 10.0),
            ("d".to_string(), 0.1, 10.0),
        ];
        let d25 = rank_and_discard_by_duration(&entries, 25.0).unwrap();
        let discarded: Vec<&str> = d25
            .iter()
            .filter(|d| d.verdict == Verdict::Discard)
            .map(|d| d.example_id.as_str())
            .collect();
        assert_eq!(discarded, vec!["a"]);

        let d50 = rank_and_discard_by_duration(&entries, 50.0).unwrap();
        let discarded: Vec<&str> = d50
            .iter()
            .filter(|d| d.verdict == Verdict::Discard)
            .map(|d| d.example_id.as_str())
            .collect();
        assert_eq!(discarded, vec!["a", "b"]);
    }

    proptest! {
        #[test]
        fn discard_count_is_exact(n in 0usize..400, k in 0.0f64..=100.0) {
            let entries = scored(n);
            let decisions = rank_and_discard(&entries, k).unwrap();
            let discarded = decisions.iter().filter(|d| d.verdict == Verdict::Discard).count();
            prop_assert_eq!(discarded, discard_count(n, k));
        }

        #[test]
        fn discard_sets_nest_across_k(scores in proptest::collection::vec(0.0f64..5.0, 1..80)) {
            let entries: Vec<(String, f64)> = scores
                .iter()
                .enumerate()
                .map(|(i, &c)| (format!("id{i:03}"), c))
                .collect();
            let mut previous: Vec<String> = Vec::new();
            for k in [0.0, 5.0, 15.0, 25.0, 35.0, 45.0] {
                let decisions = rank_and_discard(&entries, k).unwrap();
                let discarded: Vec<String> = decisions
                    .iter()
                    .filter(|d| d.verdict == Verdict::Discard)
                    .map(|d| d.example_id.clone())
                    .collect();
                prop_assert!(previous.iter().all(|id| discarded.contains(id)));
                previous = discarded;
                // Every discarded CER dominates every kept CER.
                let min_discarded = decisions
                    .iter()
                    .filter(|d| d.verdict == Verdict::Discard)
                    .map(|d| d.cer)
                    .fold(f64::INFINITY, f64::min);
                let max_kept = decisions
                    .iter()
                    .filter(|d| d.verdict == Verdict::Keep)
                    .map(|d| d.cer)
                    .fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(min_discarded >= max_kept || previous.is_empty() || max_kept == f64::NEG_INFINITY);
            }
        }

        #[test]
        fn verdicts_are_order_invariant(scores in proptest::collection::vec(0.0f64..5.0, 1..60), k in 0.0f64..=100.0) {
            let entries: Vec<(String, f64)> = scores
                .iter()
                .enumerate()
                .map(|(i, &c)| (format!("id{i:03}"), c))
                .collect();
            let forward = rank_and_discard(&entries, k).unwrap();
            let mut reversed = entries.clone();
            reversed.reverse();
            let backward = rank_and_discard(&reversed, k).unwrap();
            prop_assert_eq!(forward, backward);
        }
    }
}
