//! `run`: execute a declarative stage list from a TOML config, producing
//! output manifests plus a machine-readable run record.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use corpora_core::error::{Error, Result};
use corpora_core::MANIFEST_SCHEMA_VERSION;

use super::filter::DiscardBasis;
use super::{candidates, filter, restore, score, splice, stats, Metric, OutputFormat, StageSummary};
use crate::io::RefField;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Seed for every randomized step (proxy sampling); identical seed,
    /// config, and inputs reproduce identical output manifests.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub jobs: Option<usize>,
    /// Where the run record lands; default `run_report.json` next to the
    /// config file.
    #[serde(default)]
    pub report: Option<String>,
    #[serde(rename = "stage")]
    pub stages: Vec<StageConfig>,
}

fn default_threshold() -> f64 {
    0.30
}

fn default_max_dur() -> f64 {
    30.0
}

fn default_gap_tolerance() -> f64 {
    0.5
}

fn default_model() -> String {
    "default".to_string()
}

fn default_language() -> String {
    "eng".to_string()
}

fn default_in_flight() -> usize {
    4
}

fn default_retries() -> u32 {
    3
}

fn default_timeout() -> f64 {
    60.0
}

fn default_backoff() -> u64 {
    250
}

fn default_proxy_n() -> u64 {
    50_000
}

fn default_cer() -> Metric {
    Metric::Cer
}

fn default_basis() -> DiscardBasis {
    DiscardBasis::Count
}

fn default_format() -> OutputFormat {
    OutputFormat::Json
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase", deny_unknown_fields)]
pub enum StageConfig {
    Stats {
        manifest: String,
        #[serde(default)]
        out: Option<String>,
        #[serde(default = "default_format")]
        format: OutputFormat,
    },
    Score {
        #[serde(rename = "ref")]
        reference: String,
        hyp: String,
        metric: Metric,
        #[serde(default = "default_language")]
        language: String,
        #[serde(default)]
        ref_field: RefField,
        #[serde(default)]
        per_example: Option<String>,
        #[serde(default)]
        averaged: bool,
        #[serde(default)]
        baseline_hyp: Option<String>,
        #[serde(default)]
        out: Option<String>,
    },
    Filter {
        manifest: String,
        hyp: String,
        #[serde(default)]
        k: Option<f64>,
        #[serde(default)]
        k_overrides: BTreeMap<String, f64>,
        out: String,
        #[serde(default)]
        decisions: Option<String>,
        #[serde(default = "default_basis")]
        by: DiscardBasis,
        #[serde(default = "default_cer")]
        metric: Metric,
        #[serde(default)]
        proxy_out: Option<String>,
        #[serde(default = "default_proxy_n")]
        proxy_n: u64,
        #[serde(default)]
        seed: Option<u64>,
    },
    Candidates {
        manifest: String,
        endpoint: String,
        out: String,
        #[serde(default = "default_model")]
        model: String,
        #[serde(default)]
        prompts: Option<String>,
        #[serde(default = "default_in_flight")]
        max_in_flight: usize,
        #[serde(default = "default_retries")]
        max_retries: u32,
        #[serde(default = "default_timeout")]
        timeout_sec: f64,
        #[serde(default = "default_backoff")]
        retry_backoff_ms: u64,
    },
    Restore {
        manifest: String,
        candidates: String,
        #[serde(default)]
        src_candidates: Option<String>,
        #[serde(default = "default_threshold")]
        threshold: f64,
        out: String,
        #[serde(default)]
        audit: Option<String>,
    },
    Splice {
        segments: String,
        #[serde(default = "default_max_dur")]
        max_dur: f64,
        #[serde(default = "default_gap_tolerance")]
        gap_tolerance: f64,
        out: String,
        #[serde(default)]
        clean_only: bool,
    },
}

impl StageConfig {
    fn name(&self) -> &'static str {
        match self {
            StageConfig::Stats { .. } => "stats",
            StageConfig::Score { .. } => "score",
            StageConfig::Filter { .. } => "filter",
            StageConfig::Candidates { .. } => "candidates",
            StageConfig::Restore { .. } => "restore",
            StageConfig::Splice { .. } => "splice",
        }
    }
}

#[derive(Debug, Serialize)]
struct StageRecord {
    name: &'static str,
    wall_ms: u128,
    input_count: u64,
    output_count: u64,
    details: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Serialize)]
struct RunReport<'a> {
    tool_version: &'static str,
    manifest_schema_version: u32,
    seed: u64,
    config_path: String,
    config: &'a PipelineConfig,
    stages: Vec<StageRecord>,
    status: String,
}

fn resolve(base: &Path, path: &str) -> PathBuf {
    let p = PathBuf::from(path);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

fn resolve_opt(base: &Path, path: &Option<String>) -> Option<PathBuf> {
    path.as_ref().map(|p| resolve(base, p))
}

fn execute_stage(stage: &StageConfig, base: &Path, pipeline_seed: u64) -> Result<StageSummary> {
    match stage {
        StageConfig::Stats { manifest, out, format } => stats::run(&stats::StatsParams {
            manifest: resolve(base, manifest),
            format: *format,
            out: resolve_opt(base, out),
        }),
        StageConfig::Score {
            reference,
            hyp,
            metric,
            language,
            ref_field,
            per_example,
            averaged,
            baseline_hyp,
            out,
        } => score::run(&score::ScoreParams {
            ref_path: resolve(base, reference),
            hyp_path: resolve(base, hyp),
            metric: *metric,
            language: language.clone(),
            ref_field: *ref_field,
            per_example: resolve_opt(base, per_example),
            averaged: *averaged,
            baseline_hyp: resolve_opt(base, baseline_hyp),
            format: OutputFormat::Json,
            out: resolve_opt(base, out),
        }),
        StageConfig::Filter {
            manifest,
            hyp,
            k,
            k_overrides,
            out,
            decisions,
            by,
            metric,
            proxy_out,
            proxy_n,
            seed,
        } => {
            let summary = filter::run(&filter::FilterParams {
                manifest: resolve(base, manifest),
                hyp: resolve(base, hyp),
                k: *k,
                k_overrides: k_overrides.iter().map(|(d, v)| (d.clone(), *v)).collect(),
                out: resolve(base, out),
                decisions: resolve_opt(base, decisions),
                by: *by,
                metric: *metric,
                proxy_out: resolve_opt(base, proxy_out),
                proxy_n: *proxy_n,
                seed: seed.unwrap_or(pipeline_seed),
            })?;
            // Count conservation: kept + discarded must reproduce the input.
            let discarded = summary
                .details
                .get("discarded")
                .and_then(|v| v.as_u64())
                .unwrap_or(0);
            if summary.output_count + discarded != summary.input_count {
                return Err(Error::Data(format!(
                    "filter counts do not reconcile: {} kept + {} discarded != {} input",
                    summary.output_count, discarded, summary.input_count
                )));
            }
            Ok(summary)
        }
        StageConfig::Candidates {
            manifest,
            endpoint,
            out,
            model,
            prompts,
            max_in_flight,
            max_retries,
            timeout_sec,
            retry_backoff_ms,
        } => candidates::run(&candidates::CandidatesParams {
            manifest: resolve(base, manifest),
            endpoint: endpoint.clone(),
            out: resolve(base, out),
            model: model.clone(),
            prompts: resolve_opt(base, prompts),
            max_in_flight: *max_in_flight,
            max_retries: *max_retries,
            timeout_sec: *timeout_sec,
            retry_backoff_ms: *retry_backoff_ms,
            auth_env: None,
        }),
        StageConfig::Restore {
            manifest,
            candidates: candidates_path,
            src_candidates,
            threshold,
            out,
            audit,
        } => restore::run(&restore::RestoreParams {
            manifest: resolve(base, manifest),
            candidates: resolve(base, candidates_path),
            src_candidates: resolve_opt(base, src_candidates),
            threshold: *threshold,
            out: resolve(base, out),
            audit: resolve_opt(base, audit),
        }),
        StageConfig::Splice {
            segments,
            max_dur,
            gap_tolerance,
            out,
            clean_only,
        } => splice::run(&splice::SpliceParams {
            segments: resolve(base, segments),
            max_duration_sec: *max_dur,
            gap_tolerance_sec: *gap_tolerance,
            out: resolve(base, out),
            clean_only: *clean_only,
        }),
    }
}

pub fn run(config_path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config_path).map_err(|e| Error::io(config_path, e))?;
    let config: PipelineConfig = toml::from_str(&text)
        .map_err(|e| Error::Config(format!("invalid pipeline config {config_path:?}: {e}")))?;
    if config.stages.is_empty() {
        return Err(Error::Config("pipeline config declares no stages".into()));
    }
    if let Some(jobs) = config.jobs {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }

    let base = config_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let report_path = config
        .report
        .as_ref()
        .map(|p| resolve(&base, p))
        .unwrap_or_else(|| base.join("run_report.json"));

    let mut records: Vec<StageRecord> = Vec::new();
    let mut failure: Option<(usize, Error)> = None;
    for (index, stage) in config.stages.iter().enumerate() {
        let started = Instant::now();
        eprintln!("run: stage {}/{} {}", index + 1, config.stages.len(), stage.name());
        match execute_stage(stage, &base, config.seed) {
            Ok(summary) => records.push(StageRecord {
                name: stage.name(),
                wall_ms: started.elapsed().as_millis(),
                input_count: summary.input_count,
                output_count: summary.output_count,
                details: summary.details,
            }),
            Err(e) => {
                failure = Some((index, e));
                break;
            }
        }
    }

    let status = match &failure {
        None => "ok".to_string(),
        Some((index, e)) => format!(
            "failed at stage {} ({}): {e}; outputs of later stages were not produced",
            index + 1,
            config.stages[*index].name()
        ),
    };
    let report = RunReport {
        tool_version: env!("CARGO_PKG_VERSION"),
        manifest_schema_version: MANIFEST_SCHEMA_VERSION,
        seed: config.seed,
        config_path: config_path.display().to_string(),
        config: &config,
        stages: records,
        status: status.clone(),
    };
    let rendered =
        serde_json::to_string_pretty(&report).expect("run report serializes");
    std::fs::write(&report_path, format!("{rendered}\n"))
        .map_err(|e| Error::io(&report_path, e))?;
    eprintln!("run: report written to {}", report_path.display());

    match failure {
        Some((_, e)) => Err(e),
        None => Ok(()),
    }
}
