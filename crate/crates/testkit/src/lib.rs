//! Test-only support: independent oracles for alignment and timeline
//! health, plus deterministic synthetic corpus generators.
//!
//! Nothing here shares code with the implementations under test; the
//! oracles re-derive expected values from the documented contracts.

pub mod oracle;
pub mod toy;

pub use oracle::{enumerate_optimal_counts, levenshtein_counts, timeline_clean_oracle, EditCounts};
pub use toy::{mutate_candidate, random_timeline, toy_corpus, ToyCorpus, VOCAB};
