//! Brute-force oracles, implemented independently of the library code they
//! check.

use std::collections::{BTreeSet, HashMap};

/// Edit-script decomposition as counted by the oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EditCounts {
    pub distance: usize,
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
}

/// Minimal edit distance and its decomposition under the documented
/// tie-break (match > sub > del > ins, applied while walking back from the
/// ends of both sequences).
///
/// Top-down memoized recursion for the distances, then a greedy walk —
/// deliberately a different shape from a bottom-up table with traceback.
pub fn levenshtein_counts(reference: &[&str], hypothesis: &[&str]) -> EditCounts {
    fn dist(
        i: usize,
        j: usize,
        reference: &[&str],
        hypothesis: &[&str],
        memo: &mut HashMap<(usize, usize), usize>,
    ) -> usize {
        if i == 0 {
            return j;
        }
        if j == 0 {
            return i;
        }
        if let Some(&d) = memo.get(&(i, j)) {
            return d;
        }
        let diag = dist(i - 1, j - 1, reference, hypothesis, memo);
        let d = if reference[i - 1] == hypothesis[j - 1] {
            diag
        } else {
            let up = dist(i - 1, j, reference, hypothesis, memo);
            let left = dist(i, j - 1, reference, hypothesis, memo);
            1 + diag.min(up).min(left)
        };
        memo.insert((i, j), d);
        d
    }

    let mut memo = HashMap::new();
    let (mut i, mut j) = (reference.len(), hypothesis.len());
    let mut counts = EditCounts {
        distance: dist(i, j, reference, hypothesis, &mut memo),
        substitutions: 0,
        insertions: 0,
        deletions: 0,
    };
    while i > 0 || j > 0 {
        let here = dist(i, j, reference, hypothesis, &mut memo);
        if i > 0
            && j > 0
            && reference[i - 1] == hypothesis[j - 1]
            && dist(i - 1, j - 1, reference, hypothesis, &mut memo) == here
        {
            i -= 1;
            j -= 1;
        } else if i > 0 && j > 0 && dist(i - 1, j - 1, reference, hypothesis, &mut memo) + 1 == here
        {
            counts.substitutions += 1;
            i -= 1;
            j -= 1;
        } else if i > 0 && dist(i - 1, j, reference, hypothesis, &mut memo) + 1 == here {
            counts.deletions += 1;
            i -= 1;
        } else {
            counts.insertions += 1;
            j -= 1;
        }
    }
    counts
}

/// Exhaustively enumerate every edit script and return the minimal cost
/// together with the set of (sub, ins, del) decompositions achieving it.
/// Only for tiny inputs.
pub fn enumerate_optimal_counts(
    reference: &[&str],
    hypothesis: &[&str],
) -> (usize, BTreeSet<(usize, usize, usize)>) {
    fn walk(
        i: usize,
        j: usize,
        reference: &[&str],
        hypothesis: &[&str],
        counts: (usize, usize, usize),
        out: &mut Vec<(usize, usize, usize)>,
    ) {
        let (subs, ins, dels) = counts;
        if i == reference.len() && j == hypothesis.len() {
            out.push(counts);
            return;
        }
        if i < reference.len() && j < hypothesis.len() {
            if reference[i] == hypothesis[j] {
                walk(i + 1, j + 1, reference, hypothesis, (subs, ins, dels), out);
            } else {
                walk(i + 1, j + 1, reference, hypothesis, (subs + 1, ins, dels), out);
            }
        }
        if i < reference.len() {
            walk(i + 1, j, reference, hypothesis, (subs, ins, dels + 1), out);
        }
        if j < hypothesis.len() {
            walk(i, j + 1, reference, hypothesis, (subs, ins + 1, dels), out);
        }
    }

    let mut all = Vec::new();
    walk(0, 0, reference, hypothesis, (0, 0, 0), &mut all);
    let min = all.iter().map(|&(s, i, d)| s + i + d).min().unwrap();
    let optimal = all
        .into_iter()
        .filter(|&(s, i, d)| s + i + d == min)
        .collect();
    (min, optimal)
}

/// Independent linear scan over a timeline: a window is clean iff no
/// untranscribed segment has positive-measure overlap with it and every
/// gap between consecutive included clips is within tolerance.
///
/// `segments` are `(start, end, transcribed)`; `included` are the clip
/// spans of one spliced example, in time order.
pub fn timeline_clean_oracle(
    segments: &[(f64, f64, bool)],
    included: &[(f64, f64)],
    gap_tolerance: f64,
) -> bool {
    let (Some(first), Some(last)) = (included.first(), included.last()) else {
        return true;
    };
    let (window_start, window_end) = (first.0, last.1);
    for &(start, end, transcribed) in segments {
        if !transcribed && start < window_end && end > window_start {
            return false;
        }
    }
    for pair in included.windows(2) {
        if pair[1].0 - pair[0].1 > gap_tolerance {
            return false;
        }
    }
    true
}
