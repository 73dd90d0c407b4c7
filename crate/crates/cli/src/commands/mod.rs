pub mod candidates;
pub mod filter;
pub mod restore;
pub mod run;
pub mod score;
pub mod splice;
pub mod stats;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use corpora_core::textnorm::NormalizationPolicy;

/// What a finished stage reports back: counts for reconciliation plus
/// free-form details for the run record.
#[derive(Debug, Clone, Default, Serialize)]
pub struct StageSummary {
    pub input_count: u64,
    pub output_count: u64,
    #[serde(default)]
    pub details: BTreeMap<String, serde_json::Value>,
}

impl StageSummary {
    pub fn detail(mut self, key: &str, value: impl Serialize) -> Self {
        self.details.insert(
            key.to_string(),
            serde_json::to_value(value).expect("detail serializes"),
        );
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Table,
    Json,
}

/// Scoring metric exposed on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
pub enum Metric {
    #[value(name = "wer")]
    #[serde(rename = "wer")]
    Wer,
    #[value(name = "cer")]
    #[serde(rename = "cer")]
    Cer,
    #[value(name = "pc-wer")]
    #[serde(rename = "pc-wer")]
    PcWer,
    #[value(name = "pc-cer")]
    #[serde(rename = "pc-cer")]
    PcCer,
}

impl Metric {
    pub fn policy(self) -> NormalizationPolicy {
        match self {
            Metric::Wer => NormalizationPolicy::wer(),
            Metric::Cer => NormalizationPolicy::cer(),
            Metric::PcWer => NormalizationPolicy::pc_wer(),
            Metric::PcCer => NormalizationPolicy::pc_cer(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Wer => "wer",
            Metric::Cer => "cer",
            Metric::PcWer => "pc-wer",
            Metric::PcCer => "pc-cer",
        }
    }
}
