//! Text normalization and tokenization shared by scoring, filtering, and
//! restoration.
//!
//! Two conventions coexist in speech-to-text evaluation: the "plain" one
//! (case folded, punctuation stripped) and the punctuation/case-sensitive
//! one ("pc"), where hypothesis text is compared verbatim. Both are
//! expressed here as a [`NormalizationPolicy`] applied before tokenization.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

/// Granularity at which error rates are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricUnit {
    Word,
    Char,
}

/// How text is canonicalized before scoring.
///
/// `unit` selects the tokenization granularity; `None` defers to
/// [`metric_unit_for`] on the example's language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationPolicy {
    pub fold_case: bool,
    pub strip_punctuation: bool,
    pub collapse_whitespace: bool,
    pub unit: Option<MetricUnit>,
}

impl NormalizationPolicy {
    /// No transformation at all; used by the pc-metrics and by edit
    /// classification, which must see casing and punctuation verbatim.
    pub fn identity() -> Self {
        NormalizationPolicy {
            fold_case: false,
            strip_punctuation: false,
            collapse_whitespace: false,
            unit: None,
        }
    }

    /// Conventional scoring normalization: fold case, strip punctuation,
    /// collapse whitespace runs.
    pub fn plain() -> Self {
        NormalizationPolicy {
            fold_case: true,
            strip_punctuation: true,
            collapse_whitespace: true,
            unit: None,
        }
    }

    pub fn wer() -> Self {
        NormalizationPolicy {
            unit: Some(MetricUnit::Word),
            ..Self::plain()
        }
    }

    pub fn cer() -> Self {
        NormalizationPolicy {
            unit: Some(MetricUnit::Char),
            ..Self::plain()
        }
    }

    pub fn pc_wer() -> Self {
        NormalizationPolicy {
            unit: Some(MetricUnit::Word),
            ..Self::identity()
        }
    }

    pub fn pc_cer() -> Self {
        NormalizationPolicy {
            unit: Some(MetricUnit::Char),
            ..Self::identity()
        }
    }
}

/// Punctuation inventory and word-internal exceptions.
///
/// Punctuation is the Unicode general category group P* plus `extra_punct`.
/// Characters in `word_internal` (apostrophes and hyphens by default) do not
/// count as punctuation when a letter sits on both sides, so "don't" survives
/// stripping intact.
#[derive(Debug, Clone)]
pub struct TextRules {
    pub extra_punct: BTreeSet<char>,
    pub word_internal: BTreeSet<char>,
}

impl Default for TextRules {
    fn default() -> Self {
        TextRules {
            extra_punct: BTreeSet::new(),
            word_internal: ['\'', '\u{2019}', '-'].into_iter().collect(),
        }
    }
}

static DEFAULT_RULES: LazyLock<TextRules> = LazyLock::new(TextRules::default);

// Unicode P* ranges, extracted once from the regex-syntax unicode tables.
static PUNCT_RANGES: LazyLock<Vec<(char, char)>> = LazyLock::new(|| {
    use regex_syntax::hir::{Class, HirKind};
    let hir = regex_syntax::Parser::new()
        .parse(r"\p{P}")
        .expect("unicode punctuation class");
    match hir.into_kind() {
        HirKind::Class(Class::Unicode(cls)) => {
            cls.ranges().iter().map(|r| (r.start(), r.end())).collect()
        }
        _ => unreachable!("\\p{{P}} is a unicode class"),
    }
});

fn in_punct_category(c: char) -> bool {
    PUNCT_RANGES
        .binary_search_by(|&(lo, hi)| {
            if hi < c {
                Ordering::Less
            } else if lo > c {
                Ordering::Greater
            } else {
                Ordering::Equal
            }
        })
        .is_ok()
}

impl TextRules {
    /// Context-free punctuation test.
    pub fn is_punct(&self, c: char) -> bool {
        in_punct_category(c) || self.extra_punct.contains(&c)
    }

    /// Context-sensitive test: `c` at a position whose neighbors are
    /// `prev`/`next`. Word-internal characters flanked by letters are not
    /// punctuation.
    pub fn is_punct_at(&self, prev: Option<char>, c: char, next: Option<char>) -> bool {
        if !self.is_punct(c) {
            return false;
        }
        if self.word_internal.contains(&c)
            && prev.is_some_and(|p| p.is_alphabetic())
            && next.is_some_and(|n| n.is_alphabetic())
        {
            return false;
        }
        true
    }
}

/// Deterministic, locale-independent case folding.
pub fn fold_case(text: &str) -> String {
    text.to_lowercase()
}

/// Apply a normalization policy with the default punctuation rules.
pub fn normalize(text: &str, policy: &NormalizationPolicy) -> String {
    normalize_with(text, policy, &DEFAULT_RULES)
}

/// Apply a normalization policy. Deterministic and idempotent for every
/// policy: folding, stripping, and whitespace collapsing are each fixpoints.
pub fn normalize_with(text: &str, policy: &NormalizationPolicy, rules: &TextRules) -> String {
    let mut out = if policy.fold_case {
        fold_case(text)
    } else {
        text.to_string()
    };
    if policy.strip_punctuation {
        out = strip_punctuation(&out, rules);
    }
    if policy.collapse_whitespace {
        out = out.split_whitespace().collect::<Vec<_>>().join(" ");
    }
    out
}

fn strip_punctuation(text: &str, rules: &TextRules) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    for (i, &c) in chars.iter().enumerate() {
        let prev = if i > 0 { Some(chars[i - 1]) } else { None };
        let next = chars.get(i + 1).copied();
        if !rules.is_punct_at(prev, c, next) {
            out.push(c);
        }
    }
    out
}

/// One scoring token: the raw surface plus its decomposition into leading
/// punctuation, core, and trailing punctuation.
///
/// Invariant: `surface == lead_punct + core + trail_punct`, and the core
/// never starts or ends with a punctuation character.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    surface: String,
    core_start: usize,
    core_end: usize,
}

impl Token {
    /// Decompose a whitespace-free surface with the default rules.
    pub fn new(surface: impl Into<String>) -> Self {
        Self::with_rules(surface, &DEFAULT_RULES)
    }

    pub fn with_rules(surface: impl Into<String>, rules: &TextRules) -> Self {
        let surface = surface.into();
        let chars: Vec<(usize, char)> = surface.char_indices().collect();
        let strippable = |i: usize| -> bool {
            let prev = if i > 0 { Some(chars[i - 1].1) } else { None };
            let next = chars.get(i + 1).map(|&(_, c)| c);
            rules.is_punct_at(prev, chars[i].1, next)
        };
        let mut lo = 0;
        while lo < chars.len() && strippable(lo) {
            lo += 1;
        }
        let mut hi = chars.len();
        while hi > lo && strippable(hi - 1) {
            hi -= 1;
        }
        let core_start = if lo < chars.len() {
            chars[lo].0
        } else {
            surface.len()
        };
        let core_end = if hi < chars.len() {
            chars[hi].0
        } else {
            surface.len()
        };
        Token {
            surface,
            core_start,
            core_end,
        }
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }

    pub fn core(&self) -> &str {
        &self.surface[self.core_start..self.core_end]
    }

    pub fn lead_punct(&self) -> &str {
        &self.surface[..self.core_start]
    }

    pub fn trail_punct(&self) -> &str {
        &self.surface[self.core_end..]
    }

    /// True when the token carries no core at all (pure punctuation).
    pub fn is_pure_punct(&self) -> bool {
        !self.surface.is_empty() && self.core().is_empty()
    }
}

/// Split text into scoring tokens with the default rules.
///
/// `Word` splits on whitespace runs; `Char` yields one token per Unicode
/// scalar, excluding whitespace.
pub fn tokenize(text: &str, unit: MetricUnit) -> Vec<Token> {
    tokenize_with(text, unit, &DEFAULT_RULES)
}

pub fn tokenize_with(text: &str, unit: MetricUnit, rules: &TextRules) -> Vec<Token> {
    match unit {
        MetricUnit::Word => text
            .split_whitespace()
            .map(|w| Token::with_rules(w, rules))
            .collect(),
        MetricUnit::Char => text
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| Token::with_rules(c.to_string(), rules))
            .collect(),
    }
}

/// Per-language defaults: which languages have no case distinction and which
/// are scored at character granularity.
#[derive(Debug, Clone)]
pub struct LanguageRules {
    pub caseless: BTreeSet<String>,
    pub char_scored: BTreeSet<String>,
}

impl Default for LanguageRules {
    fn default() -> Self {
        let set = |codes: &[&str]| codes.iter().map(|s| s.to_string()).collect();
        LanguageRules {
            caseless: set(&["zho", "jpn", "kor", "tha"]),
            char_scored: set(&["zho", "jpn", "kor", "tha"]),
        }
    }
}

static DEFAULT_LANGUAGES: LazyLock<LanguageRules> = LazyLock::new(LanguageRules::default);

impl LanguageRules {
    pub fn metric_unit_for(&self, language: &str) -> MetricUnit {
        if self.char_scored.contains(language) {
            MetricUnit::Char
        } else {
            MetricUnit::Word
        }
    }

    pub fn is_caseless(&self, language: &str) -> bool {
        self.caseless.contains(language)
    }
}

/// Scoring granularity convention for a language, with the default rules:
/// char for zho/jpn/kor/tha, word otherwise.
pub fn metric_unit_for(language: &str) -> MetricUnit {
    DEFAULT_LANGUAGES.metric_unit_for(language)
}
