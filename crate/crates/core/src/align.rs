//! Levenshtein alignment with traceback, plus the error-rate decomposition
//! (substitution/insertion/deletion) built on top of it.

use serde::{Deserialize, Serialize};

use crate::textnorm::{
    metric_unit_for, normalize_with, tokenize_with, NormalizationPolicy, TextRules, Token,
};

/// One step of an alignment. Payloads encode the per-kind token invariants:
/// match/sub carry both tokens, ins only the hypothesis token, del only the
/// reference token.
#[derive(Debug, Clone, PartialEq)]
pub enum AlignOp {
    Match { ref_token: Token, hyp_token: Token },
    Sub { ref_token: Token, hyp_token: Token },
    Ins { hyp_token: Token },
    Del { ref_token: Token },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Match,
    Sub,
    Ins,
    Del,
}

impl AlignOp {
    pub fn kind(&self) -> OpKind {
        match self {
            AlignOp::Match { .. } => OpKind::Match,
            AlignOp::Sub { .. } => OpKind::Sub,
            AlignOp::Ins { .. } => OpKind::Ins,
            AlignOp::Del { .. } => OpKind::Del,
        }
    }

    pub fn ref_token(&self) -> Option<&Token> {
        match self {
            AlignOp::Match { ref_token, .. }
            | AlignOp::Sub { ref_token, .. }
            | AlignOp::Del { ref_token } => Some(ref_token),
            AlignOp::Ins { .. } => None,
        }
    }

    pub fn hyp_token(&self) -> Option<&Token> {
        match self {
            AlignOp::Match { hyp_token, .. }
            | AlignOp::Sub { hyp_token, .. }
            | AlignOp::Ins { hyp_token } => Some(hyp_token),
            AlignOp::Del { .. } => None,
        }
    }
}

/// A minimal-distance edit script from reference to hypothesis.
#[derive(Debug, Clone)]
pub struct Alignment {
    pub ops: Vec<AlignOp>,
    pub ref_len: usize,
    pub distance: usize,
}

impl Alignment {
    /// (matches, substitutions, insertions, deletions)
    pub fn counts(&self) -> (usize, usize, usize, usize) {
        let mut c = (0, 0, 0, 0);
        for op in &self.ops {
            match op.kind() {
                OpKind::Match => c.0 += 1,
                OpKind::Sub => c.1 += 1,
                OpKind::Ins => c.2 += 1,
                OpKind::Del => c.3 += 1,
            }
        }
        c
    }

    /// Replay the script against the reference side, yielding the hypothesis
    /// token sequence.
    pub fn replay_hyp(&self) -> Vec<&Token> {
        self.ops.iter().filter_map(|op| op.hyp_token()).collect()
    }
}

/// Align two token sequences under unit edit costs.
///
/// Among equal-cost choices the traceback (walking from the end of both
/// sequences) prefers match > sub > del > ins, which pins one deterministic
/// script for every input on every platform.
pub fn align(ref_tokens: &[Token], hyp_tokens: &[Token]) -> Alignment {
    let m = ref_tokens.len();
    let n = hyp_tokens.len();
    let width = n + 1;
    let mut dp = vec![0u32; (m + 1) * width];
    for (j, cell) in dp.iter_mut().enumerate().take(width) {
        *cell = j as u32;
    }
    for i in 1..=m {
        dp[i * width] = i as u32;
        for j in 1..=n {
            let diag = dp[(i - 1) * width + (j - 1)];
            let cell = if ref_tokens[i - 1].surface() == hyp_tokens[j - 1].surface() {
                diag
            } else {
                let del = dp[(i - 1) * width + j];
                let ins = dp[i * width + (j - 1)];
                1 + diag.min(del).min(ins)
            };
            dp[i * width + j] = cell;
        }
    }

    let mut ops = Vec::with_capacity(m.max(n));
    let (mut i, mut j) = (m, n);
    while i > 0 || j > 0 {
        let v = dp[i * width + j];
        if i > 0
            && j > 0
            && ref_tokens[i - 1].surface() == hyp_tokens[j - 1].surface()
            && dp[(i - 1) * width + (j - 1)] == v
        {
            ops.push(AlignOp::Match {
                ref_token: ref_tokens[i - 1].clone(),
                hyp_token: hyp_tokens[j - 1].clone(),
            });
            i -= 1;
            j -= 1;
        } else if i > 0 && j > 0 && dp[(i - 1) * width + (j - 1)] + 1 == v {
            ops.push(AlignOp::Sub {
                ref_token: ref_tokens[i - 1].clone(),
                hyp_token: hyp_tokens[j - 1].clone(),
            });
            i -= 1;
            j -= 1;
        } else if i > 0 && dp[(i - 1) * width + j] + 1 == v {
            ops.push(AlignOp::Del {
                ref_token: ref_tokens[i - 1].clone(),
            });
            i -= 1;
        } else {
            debug_assert!(j > 0 && dp[i * width + (j - 1)] + 1 == v);
            ops.push(AlignOp::Ins {
                hyp_token: hyp_tokens[j - 1].clone(),
            });
            j -= 1;
        }
    }
    ops.reverse();

    Alignment {
        ops,
        ref_len: m,
        distance: dp[m * width + n] as usize,
    }
}

/// Error counts for one pair or a pooled corpus. Rates are derived on
/// demand so that pooling stays a plain field-wise sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub matches: u64,
    pub substitutions: u64,
    pub insertions: u64,
    pub deletions: u64,
    pub ref_len: u64,
    pub hyp_len: u64,
}

impl ErrorRates {
    pub fn from_alignment(alignment: &Alignment) -> Self {
        let (m, s, i, d) = alignment.counts();
        ErrorRates {
            matches: m as u64,
            substitutions: s as u64,
            insertions: i as u64,
            deletions: d as u64,
            ref_len: alignment.ref_len as u64,
            hyp_len: (m + s + i) as u64,
        }
    }

    pub fn distance(&self) -> u64 {
        self.substitutions + self.insertions + self.deletions
    }

    /// An empty reference scored against a nonempty hypothesis has no
    /// meaningful denominator; such rates are flagged rather than rejected.
    pub fn degenerate(&self) -> bool {
        self.ref_len == 0 && self.hyp_len > 0
    }

    fn denominator(&self) -> f64 {
        if self.ref_len > 0 {
            self.ref_len as f64
        } else {
            self.hyp_len.max(1) as f64
        }
    }

    pub fn total(&self) -> f64 {
        self.distance() as f64 / self.denominator()
    }

    pub fn sub_rate(&self) -> f64 {
        self.substitutions as f64 / self.denominator()
    }

    pub fn ins_rate(&self) -> f64 {
        self.insertions as f64 / self.denominator()
    }

    pub fn del_rate(&self) -> f64 {
        self.deletions as f64 / self.denominator()
    }

    /// Field-wise accumulation; associative and commutative, so corpus
    /// pooling can be sharded and merged in any order.
    pub fn merge(&mut self, other: &ErrorRates) {
        self.matches += other.matches;
        self.substitutions += other.substitutions;
        self.insertions += other.insertions;
        self.deletions += other.deletions;
        self.ref_len += other.ref_len;
        self.hyp_len += other.hyp_len;
    }
}

/// Score one (reference, hypothesis) pair.
///
/// Both texts are normalized under `policy`, then tokenized at
/// `policy.unit` if set, else at [`metric_unit_for`] the language.
pub fn error_rate(
    ref_text: &str,
    hyp_text: &str,
    language: &str,
    policy: &NormalizationPolicy,
) -> ErrorRates {
    error_rate_with(ref_text, hyp_text, language, policy, &TextRules::default())
}

pub fn error_rate_with(
    ref_text: &str,
    hyp_text: &str,
    language: &str,
    policy: &NormalizationPolicy,
    rules: &TextRules,
) -> ErrorRates {
    let unit = policy.unit.unwrap_or_else(|| metric_unit_for(language));
    let ref_norm = normalize_with(ref_text, policy, rules);
    let hyp_norm = normalize_with(hyp_text, policy, rules);
    let ref_tokens = tokenize_with(&ref_norm, unit, rules);
    let hyp_tokens = tokenize_with(&hyp_norm, unit, rules);
    ErrorRates::from_alignment(&align(&ref_tokens, &hyp_tokens))
}

/// Pooled corpus rate: sum of errors over sum of reference lengths, not the
/// mean of per-example rates.
pub fn corpus_error_rate<'a, I>(pairs: I, language: &str, policy: &NormalizationPolicy) -> ErrorRates
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut pooled = ErrorRates::default();
    for (r, h) in pairs {
        pooled.merge(&error_rate(r, h, language, policy));
    }
    pooled
}

/// Mean of per-example total rates; the non-default pooling, kept behind an
/// explicit call / CLI flag.
pub fn corpus_error_rate_averaged<'a, I>(
    pairs: I,
    language: &str,
    policy: &NormalizationPolicy,
) -> f64
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut sum = 0.0;
    let mut count = 0usize;
    for (r, h) in pairs {
        sum += error_rate(r, h, language, policy).total();
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textnorm::{tokenize, MetricUnit};

    fn words(s: &str) -> Vec<Token> {
        tokenize(s, MetricUnit::Word)
    }

    fn chars(s: &str) -> Vec<Token> {
        tokenize(s, MetricUnit::Char)
    }

    #[test]
    fn empty_vs_empty() {
        let a = align(&[], &[]);
        assert_eq!(a.distance, 0);
        assert!(a.ops.is_empty());
        assert_eq!(a.ref_len, 0);
    }

    #[test]
    fn single_word_substitution() {
        let a = align(&words("a b c d"), &words("a b x d"));
        assert_eq!(a.distance, 1);
        let (m, s, i, d) = a.counts();
        assert_eq!((m, s, i, d), (3, 1, 0, 0));
    }

    #[test]
    fn single_char_deletion() {
        let a = align(&chars("abcd"), &chars("abd"));
        assert_eq!(a.distance, 1);
        let (m, s, i, d) = a.counts();
        assert_eq!((m, s, i, d), (3, 0, 0, 1));
        let rates = ErrorRates::from_alignment(&a);
        assert!((rates.total() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn tiebreak_prefers_substitutions() {
        // "ab" vs "ba" admits {2 subs} and {del+ins} at distance 2; the
        // documented tie-break picks the substitution script.
        let a = align(&chars("ab"), &chars("ba"));
        assert_eq!(a.distance, 2);
        let (m, s, i, d) = a.counts();
        assert_eq!((m, s, i, d), (0, 2, 0, 0));
    }

    #[test]
    fn replay_reconstructs_hypothesis() {
        let hyp = words("the quick brown fox,");
        let a = align(&words("a quick fox"), &hyp);
        let replayed: Vec<&str> = a.replay_hyp().iter().map(|t| t.surface()).collect();
        let expected: Vec<&str> = hyp.iter().map(|t| t.surface()).collect();
        assert_eq!(replayed, expected);
    }

    #[test]
    fn error_rate_identical_texts() {
        let r = error_rate("same text here", "same text here", "eng", &NormalizationPolicy::plain());
        assert_eq!(r.total(), 0.0);
        assert!(!r.degenerate());
    }

    #[test]
    fn error_rate_one_sub_over_five_words() {
        let r = error_rate(
            "he went toward the god",
            "he went towards the god",
            "eng",
            &NormalizationPolicy::plain(),
        );
        assert!((r.total() - 0.2).abs() < 1e-12);
        assert!((r.sub_rate() - 0.2).abs() < 1e-12);
        assert_eq!(r.ins_rate(), 0.0);
        assert_eq!(r.del_rate(), 0.0);
    }

    #[test]
    fn pc_metric_sees_case_and_punct() {
        // Under the identity policy only "Hello," differs; "world" matches,
        // so pc-WER is 1/2 while the plain WER is 0.
        let pc = error_rate("Hello, world", "hello world", "eng", &NormalizationPolicy::pc_wer());
        assert!((pc.total() - 0.5).abs() < 1e-12);
        let plain = error_rate("Hello, world", "hello world", "eng", &NormalizationPolicy::wer());
        assert_eq!(plain.total(), 0.0);
    }

    #[test]
    fn language_unit_selection() {
        // Against a zho reference the default policy scores characters.
        let r = error_rate("你好 世界", "你好 世间", "zho", &NormalizationPolicy::plain());
        assert_eq!(r.ref_len, 4);
        assert_eq!(r.distance(), 1);
        // An explicit unit overrides the per-language choice.
        let w = error_rate("你好 世界", "你好 世间", "zho", &NormalizationPolicy::wer());
        assert_eq!(w.ref_len, 2);
    }

    #[test]
    fn degenerate_empty_reference() {
        let r = error_rate("", "something here", "eng", &NormalizationPolicy::plain());
        assert!(r.degenerate());
        assert_eq!(r.ref_len, 0);
        assert!((r.total() - 1.0).abs() < 1e-12);
        let both_empty = error_rate("", "", "eng", &NormalizationPolicy::plain());
        assert!(!both_empty.degenerate());
        assert_eq!(both_empty.total(), 0.0);
    }

    #[test]
    fn corpus_pooling_is_count_based() {
        let pairs = [("a", "b"), ("w x y z a b c d e", "w x y z a b c d e")];
        let pooled = corpus_error_rate(
            pairs.iter().map(|(r, h)| (*r, *h)),
            "eng",
            &NormalizationPolicy::wer(),
        );
        // 1 error over 10 reference words.
        assert!((pooled.total() - 0.1).abs() < 1e-12);
        // The averaged variant differs: (1.0 + 0.0) / 2.
        let avg = corpus_error_rate_averaged(
            pairs.iter().map(|(r, h)| (*r, *h)),
            "eng",
            &NormalizationPolicy::wer(),
        );
        assert!((avg - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_pair_pooling_matches_pair_rate() {
        let one = error_rate("a b c", "a x c", "eng", &NormalizationPolicy::wer());
        let pooled = corpus_error_rate(
            std::iter::once(("a b c", "a x c")),
            "eng",
            &NormalizationPolicy::wer(),
        );
        assert_eq!(one, pooled);
    }

    #[test]
    fn decomposition_sums_to_total() {
        let r = error_rate(
            "the quick brown fox jumps",
            "a quick fox jumped over",
            "eng",
            &NormalizationPolicy::wer(),
        );
        let lhs = r.total();
        let rhs = r.sub_rate() + r.ins_rate() + r.del_rate();
        assert!((lhs - rhs).abs() <= 1e-12);
    }
}
