//! Curation toolkit for heterogeneous speech-to-text training corpora.
//!
//! The pieces, in pipeline order:
//!
//! - [`manifest`] — the example data model, line-delimited manifest I/O,
//!   and per-dataset corpus statistics.
//! - [`textnorm`] — normalization policies (plain vs punctuation/case
//!   sensitive) and word/char tokenization.
//! - [`mod@align`] — Levenshtein alignment with traceback and the
//!   sub/ins/del error-rate decomposition (CER, WER, pc-CER, pc-WER).
//! - [`filter`] — rank examples by CER against seed-model hypotheses and
//!   discard the worst k%, with language grouping and proxy sampling.
//! - [`llm`] — prompt templates and a batch client for LLM restoration
//!   candidates, plus a deterministic offline mock.
//! - [`restore`] — constrained acceptance of candidate restorations:
//!   casing and punctuation edits only, never word changes.
//! - [`longform`] — splice consecutive clips into long-form examples and
//!   flag windows containing untranscribed speech.

pub mod align;
pub mod error;
pub mod filter;
pub mod llm;
pub mod longform;
pub mod manifest;
pub mod restore;
pub mod textnorm;

pub use align::{align, corpus_error_rate, error_rate, AlignOp, Alignment, ErrorRates, OpKind};
pub use error::{EndpointError, Error, Result};
pub use filter::{
    group_languages, proxy_sample, rank_and_discard, FilterConfig, FilterDecision, Verdict,
};
pub use llm::{
    BatchClient, CandidateRecord, CandidateStatus, CompletionBackend, EndpointConfig, HttpBackend,
    MockBackend, MockMode, PromptLibrary, PromptTemplate,
};
pub use longform::{
    clean_subset, deletion_report, splice, LongFormExample, Segment, SegmentTimeline, SpliceConfig,
};
pub use manifest::{
    corpus_stats, read_manifest, write_manifest, AudioRef, CorpusStats, Example, Task, TextRecord,
    MANIFEST_SCHEMA_VERSION,
};
pub use restore::{
    apply_accepted, classify_edits, propagate_context, restore_example, EditClass, EditDecision,
    RestorationOutcome, RestoreConfig, RestoreStatus,
};
pub use textnorm::{
    fold_case, metric_unit_for, normalize, tokenize, LanguageRules, MetricUnit,
    NormalizationPolicy, TextRules, Token,
};
