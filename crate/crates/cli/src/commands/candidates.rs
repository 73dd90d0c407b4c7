//! `candidates`: render the restoration prompt for every example and
//! collect greedy completions from the configured endpoint (or the offline
//! mock), writing one `{id, candidate_text, status}` line per example in
//! manifest order.

use std::path::PathBuf;

use corpora_core::error::{EndpointError, Error, Result};
use corpora_core::llm::{
    BatchClient, CandidateRecord, CandidateStatus, CompletionBackend, EndpointConfig, HttpBackend,
    MockBackend, MockMode, PromptConfig, PromptLibrary,
};
use corpora_core::manifest::read_manifest_vec;

use super::StageSummary;
use crate::io::write_jsonl;

#[derive(Debug, Clone)]
pub struct CandidatesParams {
    pub manifest: PathBuf,
    pub endpoint: String,
    pub out: PathBuf,
    pub model: String,
    pub prompts: Option<PathBuf>,
    pub max_in_flight: usize,
    pub max_retries: u32,
    pub timeout_sec: f64,
    pub retry_backoff_ms: u64,
    pub auth_env: Option<String>,
}

fn build_backend(params: &CandidatesParams) -> Result<Box<dyn CompletionBackend>> {
    if let Some(mode) = params.endpoint.strip_prefix("mock:") {
        let mode = match mode {
            "echo" => MockMode::Echo,
            "upper" => MockMode::Uppercase,
            "sentence" => MockMode::SentenceCase,
            other => {
                return Err(Error::Config(format!(
                    "unknown mock mode {other:?}; expected echo, upper, or sentence"
                )))
            }
        };
        return Ok(Box::new(MockBackend::new(mode)));
    }
    if !params.endpoint.starts_with("http://") && !params.endpoint.starts_with("https://") {
        return Err(Error::Config(format!(
            "endpoint must be an http(s) URL or mock:<mode>, got {:?}",
            params.endpoint
        )));
    }
    let auth_token = match &params.auth_env {
        Some(var) => Some(std::env::var(var).map_err(|_| {
            Error::Config(format!("auth token environment variable {var:?} is not set"))
        })?),
        None => std::env::var("CORPORA_API_TOKEN").ok(),
    };
    Ok(Box::new(HttpBackend::new(EndpointConfig {
        base_url: params.endpoint.clone(),
        model_name: params.model.clone(),
        auth_token,
        timeout_sec: params.timeout_sec,
        max_in_flight: params.max_in_flight,
        max_retries: params.max_retries,
        retry_backoff_ms: params.retry_backoff_ms,
    })))
}

fn load_prompts(path: Option<&PathBuf>) -> Result<PromptLibrary> {
    match path {
        None => Ok(PromptLibrary::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let config: PromptConfig = toml::from_str(&text)
                .map_err(|e| Error::Config(format!("invalid prompts file {path:?}: {e}")))?;
            PromptLibrary::with_config(&config)
        }
    }
}

pub fn run(params: &CandidatesParams) -> Result<StageSummary> {
    let examples = read_manifest_vec(&params.manifest)?;
    let library = load_prompts(params.prompts.as_ref())?;
    let backend = build_backend(params)?;
    let client = BatchClient::new(
        backend,
        params.max_in_flight,
        params.max_retries,
        params.retry_backoff_ms,
    );

    // Empty targets are skipped up front; everything else goes to the batch.
    let mut records: Vec<Option<CandidateRecord>> = Vec::with_capacity(examples.len());
    let mut requests: Vec<(usize, String, String)> = Vec::new();
    for (idx, example) in examples.iter().enumerate() {
        if example.y_tgt.trim().is_empty() {
            records.push(Some(CandidateRecord {
                id: example.id.clone(),
                candidate_text: None,
                status: CandidateStatus::Skipped,
            }));
        } else {
            records.push(None);
            let prompt = library.render_for(&example.language, &example.y_tgt);
            requests.push((idx, example.id.clone(), prompt));
        }
    }

    let items: Vec<(String, String)> = requests
        .iter()
        .map(|(_, id, prompt)| (id.clone(), prompt.clone()))
        .collect();
    let (batch, stats) = client.complete_batch(&items);
    for ((idx, _, _), record) in requests.iter().zip(batch) {
        records[*idx] = Some(record);
    }
    let records: Vec<CandidateRecord> = records.into_iter().map(|r| r.expect("filled")).collect();
    write_jsonl(&params.out, &records)?;

    eprintln!(
        "candidates: {} ok, {} failed, {} skipped, {} retries",
        stats.completed,
        stats.failed,
        records
            .iter()
            .filter(|r| r.status == CandidateStatus::Skipped)
            .count(),
        stats.retries
    );

    // Partial failures fail open (the restore stage keeps those examples
    // unchanged); a fully dead endpoint is a hard error.
    if !items.is_empty() && stats.completed == 0 {
        return Err(EndpointError::Exhausted {
            attempts: params.max_retries + 1,
            last: format!("all {} completion requests failed", items.len()),
        }
        .into());
    }

    Ok(StageSummary {
        input_count: examples.len() as u64,
        output_count: records.len() as u64,
        ..Default::default()
    }
    .detail("completed", stats.completed)
    .detail("failed", stats.failed)
    .detail("retries", stats.retries))
}
