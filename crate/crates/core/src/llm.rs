//! LLM endpoint client for restoration candidates: prompt templates with
//! per-language overrides, a batch completion client with bounded
//! concurrency and retry, text log-probability scoring for perplexity
//! reports, and a deterministic offline mock.
//!
//! Decoding is always greedy (temperature zero, no sampling knobs), so a
//! given endpoint and prompt produce one reproducible candidate.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU32, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{EndpointError, Error, Result};

/// The default restoration prompt. `<language>` and `<input>` are the
/// placeholder markers substituted at render time.
pub const ENGLISH_PROMPT: &str = "For the given <language> sentence, restore the upper-case \
characters (if applicable) and add punctuation WITHOUT CHANGING ANY WORDS. Answer in <language> \
without any explanation. Here is the sentence: <input>. Here is the output:";

const LANGUAGE_PLACEHOLDER: &str = "<language>";
const INPUT_PLACEHOLDER: &str = "<input>";

/// A restoration prompt for one language. Validated at construction:
/// `<input>` must appear exactly once and `<language>` at least once, so a
/// broken template fails at load time rather than mid-batch.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    language: String,
    template: String,
}

impl PromptTemplate {
    pub fn new(language: impl Into<String>, template: impl Into<String>) -> Result<Self> {
        let language = language.into();
        let template = template.into();
        let inputs = template.matches(INPUT_PLACEHOLDER).count();
        if inputs != 1 {
            return Err(Error::Config(format!(
                "prompt template for {language:?} must contain `{INPUT_PLACEHOLDER}` exactly once, found {inputs}"
            )));
        }
        if !template.contains(LANGUAGE_PLACEHOLDER) {
            return Err(Error::Config(format!(
                "prompt template for {language:?} must contain `{LANGUAGE_PLACEHOLDER}`"
            )));
        }
        Ok(PromptTemplate { language, template })
    }

    pub fn english_default() -> Self {
        PromptTemplate::new("eng", ENGLISH_PROMPT).expect("default template is valid")
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn template(&self) -> &str {
        &self.template
    }

    /// Substitute the placeholders; no other mutation of the template.
    pub fn render(&self, language_display_name: &str, input: &str) -> String {
        self.template
            .replace(LANGUAGE_PLACEHOLDER, language_display_name)
            .replace(INPUT_PLACEHOLDER, input)
    }
}

/// User-editable prompt configuration: template text and display names per
/// ISO-639-3 code. Only English ships prefilled; other languages fall back
/// to the English template with their own display name until a translation
/// is supplied.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PromptConfig {
    #[serde(default)]
    pub display_names: BTreeMap<String, String>,
    #[serde(default)]
    pub templates: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct PromptLibrary {
    templates: BTreeMap<String, PromptTemplate>,
    display_names: BTreeMap<String, String>,
    fallback: PromptTemplate,
}

impl Default for PromptLibrary {
    fn default() -> Self {
        let display_names = [
            ("eng", "English"),
            ("zho", "Chinese"),
            ("deu", "German"),
            ("fra", "French"),
            ("spa", "Spanish"),
            ("ita", "Italian"),
            ("nld", "Dutch"),
            ("por", "Portuguese"),
            ("pol", "Polish"),
        ]
        .into_iter()
        .map(|(code, name)| (code.to_string(), name.to_string()))
        .collect();
        PromptLibrary {
            templates: BTreeMap::new(),
            display_names,
            fallback: PromptTemplate::english_default(),
        }
    }
}

impl PromptLibrary {
    /// Overlay a user configuration on the defaults. Template validation
    /// happens here, at load time.
    pub fn with_config(config: &PromptConfig) -> Result<Self> {
        let mut library = PromptLibrary::default();
        for (code, name) in &config.display_names {
            library.display_names.insert(code.clone(), name.clone());
        }
        for (code, template) in &config.templates {
            library
                .templates
                .insert(code.clone(), PromptTemplate::new(code.clone(), template)?);
        }
        Ok(library)
    }

    pub fn display_name<'a>(&'a self, language: &'a str) -> &'a str {
        self.display_names
            .get(language)
            .map(String::as_str)
            .unwrap_or(language)
    }

    pub fn template_for(&self, language: &str) -> &PromptTemplate {
        self.templates.get(language).unwrap_or(&self.fallback)
    }

    pub fn render_for(&self, language: &str, input: &str) -> String {
        self.template_for(language)
            .render(self.display_name(language), input)
    }
}

/// Connection settings for a completions endpoint. Decoding is fixed to
/// greedy; there is intentionally no sampling configuration here.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_token: Option<String>,
    pub timeout_sec: f64,
    pub max_in_flight: usize,
    pub max_retries: u32,
    /// Base backoff; doubles per retry.
    pub retry_backoff_ms: u64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "http://localhost:8000".to_string(),
            model_name: "default".to_string(),
            auth_token: None,
            timeout_sec: 60.0,
            max_in_flight: 4,
            max_retries: 3,
            retry_backoff_ms: 250,
        }
    }
}

/// Transport abstraction: the HTTP client and the offline mock implement
/// the same pair of calls.
pub trait CompletionBackend: Send + Sync {
    fn complete(&self, prompt: &str) -> std::result::Result<String, EndpointError>;

    /// Per-token log-probabilities of `text` under the model.
    fn logprobs(&self, text: &str) -> std::result::Result<Vec<f64>, EndpointError>;
}

impl<T: CompletionBackend + ?Sized> CompletionBackend for Box<T> {
    fn complete(&self, prompt: &str) -> std::result::Result<String, EndpointError> {
        (**self).complete(prompt)
    }

    fn logprobs(&self, text: &str) -> std::result::Result<Vec<f64>, EndpointError> {
        (**self).logprobs(text)
    }
}

impl<T: CompletionBackend + ?Sized> CompletionBackend for std::sync::Arc<T> {
    fn complete(&self, prompt: &str) -> std::result::Result<String, EndpointError> {
        (**self).complete(prompt)
    }

    fn logprobs(&self, text: &str) -> std::result::Result<Vec<f64>, EndpointError> {
        (**self).logprobs(text)
    }
}

/// JSON-over-HTTP backend speaking the chat-completions protocol common to
/// open-model servers; log-probabilities use the echo mode of the plain
/// completions endpoint.
pub struct HttpBackend {
    config: EndpointConfig,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(config: EndpointConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_sec)))
            .build()
            .new_agent();
        HttpBackend { config, agent }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.config.base_url.trim_end_matches('/'))
    }

    fn post(
        &self,
        path: &str,
        body: &serde_json::Value,
    ) -> std::result::Result<serde_json::Value, EndpointError> {
        let mut request = self.agent.post(self.url(path));
        if let Some(token) = &self.config.auth_token {
            request = request.header("Authorization", format!("Bearer {token}"));
        }
        match request.send_json(body) {
            Ok(mut response) => response
                .body_mut()
                .read_json::<serde_json::Value>()
                .map_err(|e| EndpointError::Fatal(format!("invalid response body: {e}"))),
            Err(e) => Err(classify_http_error(e)),
        }
    }
}

fn classify_http_error(e: ureq::Error) -> EndpointError {
    match e {
        ureq::Error::StatusCode(code) if code == 404 || code == 501 => {
            EndpointError::FeatureUnavailable(format!("endpoint returned status {code}"))
        }
        ureq::Error::StatusCode(code) if code >= 500 || code == 429 => {
            EndpointError::Transient(format!("endpoint returned status {code}"))
        }
        ureq::Error::StatusCode(code) => {
            EndpointError::Fatal(format!("endpoint returned status {code}"))
        }
        ureq::Error::Timeout(t) => EndpointError::Transient(format!("timeout: {t}")),
        ureq::Error::Io(e) => EndpointError::Transient(format!("io: {e}")),
        ureq::Error::ConnectionFailed => EndpointError::Transient("connection failed".to_string()),
        ureq::Error::HostNotFound => EndpointError::Transient("host not found".to_string()),
        other => EndpointError::Fatal(other.to_string()),
    }
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, prompt: &str) -> std::result::Result<String, EndpointError> {
        let body = serde_json::json!({
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0.0,
            "stream": false,
        });
        let response = self.post("/v1/chat/completions", &body)?;
        response["choices"][0]["message"]["content"]
            .as_str()
            .map(|s| s.trim().to_string())
            .ok_or_else(|| EndpointError::Fatal("completion response missing content".to_string()))
    }

    fn logprobs(&self, text: &str) -> std::result::Result<Vec<f64>, EndpointError> {
        if text.is_empty() {
            return Err(EndpointError::Fatal("cannot score empty text".to_string()));
        }
        let body = serde_json::json!({
            "model": self.config.model_name,
            "prompt": text,
            "max_tokens": 0,
            "echo": true,
            "logprobs": 0,
            "temperature": 0.0,
        });
        let response = self.post("/v1/completions", &body)?;
        let token_logprobs = response["choices"][0]["logprobs"]["token_logprobs"]
            .as_array()
            .ok_or_else(|| {
                EndpointError::FeatureUnavailable(
                    "endpoint does not return token log-probabilities".to_string(),
                )
            })?;
        // The first position has no conditioning context and comes back null.
        Ok(token_logprobs.iter().filter_map(|v| v.as_f64()).collect())
    }
}

/// Deterministic offline backend. The completion transforms are simple
/// enough to predict in tests yet produce realistic case/punctuation edits
/// for the restoration pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockMode {
    /// Return the input unchanged.
    Echo,
    /// Return the input fully upper-cased.
    Uppercase,
    /// Capitalize the first letter and end with a period.
    SentenceCase,
}

pub struct MockBackend {
    mode: MockMode,
}

impl MockBackend {
    pub fn new(mode: MockMode) -> Self {
        MockBackend { mode }
    }

    /// Pull the `<input>` text back out of a prompt rendered from the
    /// default template; unknown prompt shapes are used whole.
    fn extract_input(prompt: &str) -> &str {
        let start_marker = "Here is the sentence: ";
        let end_marker = ". Here is the output:";
        match (prompt.find(start_marker), prompt.rfind(end_marker)) {
            (Some(s), Some(e)) if s + start_marker.len() <= e => {
                &prompt[s + start_marker.len()..e]
            }
            _ => prompt,
        }
    }
}

impl CompletionBackend for MockBackend {
    fn complete(&self, prompt: &str) -> std::result::Result<String, EndpointError> {
        let input = Self::extract_input(prompt);
        Ok(match self.mode {
            MockMode::Echo => input.to_string(),
            MockMode::Uppercase => input.to_uppercase(),
            MockMode::SentenceCase => {
                let mut out = String::with_capacity(input.len() + 1);
                let mut capitalized = false;
                for c in input.chars() {
                    if !capitalized && c.is_alphabetic() {
                        out.extend(c.to_uppercase());
                        capitalized = true;
                    } else {
                        out.push(c);
                    }
                }
                let ends_punct = out
                    .chars()
                    .last()
                    .is_some_and(|c| matches!(c, '.' | '!' | '?' | '。'));
                if !out.is_empty() && !ends_punct {
                    out.push('.');
                }
                out
            }
        })
    }

    fn logprobs(&self, text: &str) -> std::result::Result<Vec<f64>, EndpointError> {
        if text.is_empty() {
            return Err(EndpointError::Fatal("cannot score empty text".to_string()));
        }
        // Deterministic pseudo-scores keyed on token lengths.
        Ok(text
            .split_whitespace()
            .enumerate()
            .map(|(i, w)| -(1.0 + ((w.chars().count() + i) % 5) as f64 * 0.25))
            .collect())
    }
}

/// Fault-injection wrapper: fails the first `fail_first` calls with a
/// transient error, then delegates.
pub struct FlakyBackend<B> {
    inner: B,
    remaining_failures: AtomicU32,
    pub calls: AtomicU32,
}

impl<B> FlakyBackend<B> {
    pub fn new(inner: B, fail_first: u32) -> Self {
        FlakyBackend {
            inner,
            remaining_failures: AtomicU32::new(fail_first),
            calls: AtomicU32::new(0),
        }
    }

    fn should_fail(&self) -> bool {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.remaining_failures
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok()
    }
}

impl<B: CompletionBackend> CompletionBackend for FlakyBackend<B> {
    fn complete(&self, prompt: &str) -> std::result::Result<String, EndpointError> {
        if self.should_fail() {
            return Err(EndpointError::Transient("injected failure".to_string()));
        }
        self.inner.complete(prompt)
    }

    fn logprobs(&self, text: &str) -> std::result::Result<Vec<f64>, EndpointError> {
        if self.should_fail() {
            return Err(EndpointError::Transient("injected failure".to_string()));
        }
        self.inner.logprobs(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateStatus {
    Ok,
    /// Endpoint failed after all retries; the example proceeds unmodified.
    LlmFailed,
    /// No candidate requested (e.g. empty source text).
    Skipped,
}

/// One line of a candidates file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_text: Option<String>,
    pub status: CandidateStatus,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BatchStats {
    pub completed: usize,
    pub failed: usize,
    pub retries: u32,
}

/// Batch completion driver: bounded concurrency, exponential-backoff
/// retries, results emitted in input order regardless of completion order.
pub struct BatchClient<B> {
    backend: B,
    max_in_flight: usize,
    max_retries: u32,
    retry_backoff_ms: u64,
}

impl<B: CompletionBackend> BatchClient<B> {
    pub fn new(backend: B, max_in_flight: usize, max_retries: u32, retry_backoff_ms: u64) -> Self {
        BatchClient {
            backend,
            max_in_flight: max_in_flight.max(1),
            max_retries,
            retry_backoff_ms,
        }
    }

    /// One completion with retry on transient failures. Returns the text and
    /// the number of retries spent.
    pub fn complete_with_retry(
        &self,
        prompt: &str,
    ) -> std::result::Result<(String, u32), EndpointError> {
        let mut retries = 0u32;
        loop {
            match self.backend.complete(prompt) {
                Ok(text) => return Ok((text, retries)),
                Err(EndpointError::Transient(msg)) => {
                    if retries >= self.max_retries {
                        return Err(EndpointError::Exhausted {
                            attempts: retries + 1,
                            last: msg,
                        });
                    }
                    let backoff = self.retry_backoff_ms.saturating_mul(1 << retries.min(16));
                    std::thread::sleep(Duration::from_millis(backoff));
                    retries += 1;
                }
                Err(other) => return Err(other),
            }
        }
    }

    /// Complete a batch of `(id, prompt)` items. Failures are recorded per
    /// item (fail-open: the caller keeps the original text), never raised.
    pub fn complete_batch(&self, items: &[(String, String)]) -> (Vec<CandidateRecord>, BatchStats) {
        let next = AtomicUsize::new(0);
        let total_retries = AtomicU32::new(0);
        let results: Mutex<Vec<Option<CandidateRecord>>> = Mutex::new(vec![None; items.len()]);

        std::thread::scope(|scope| {
            for _ in 0..self.max_in_flight.min(items.len().max(1)) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= items.len() {
                        break;
                    }
                    let (id, prompt) = &items[i];
                    let record = match self.complete_with_retry(prompt) {
                        Ok((text, retries)) => {
                            total_retries.fetch_add(retries, Ordering::SeqCst);
                            CandidateRecord {
                                id: id.clone(),
                                candidate_text: Some(text),
                                status: CandidateStatus::Ok,
                            }
                        }
                        Err(e) => {
                            if let EndpointError::Exhausted { attempts, .. } = &e {
                                total_retries.fetch_add(attempts.saturating_sub(1), Ordering::SeqCst);
                            }
                            CandidateRecord {
                                id: id.clone(),
                                candidate_text: None,
                                status: CandidateStatus::LlmFailed,
                            }
                        }
                    };
                    results.lock().unwrap()[i] = Some(record);
                });
            }
        });

        let records: Vec<CandidateRecord> = results
            .into_inner()
            .unwrap()
            .into_iter()
            .map(|r| r.expect("every slot filled"))
            .collect();
        let completed = records
            .iter()
            .filter(|r| r.status == CandidateStatus::Ok)
            .count();
        let stats = BatchStats {
            completed,
            failed: records.len() - completed,
            retries: total_retries.load(Ordering::SeqCst),
        };
        (records, stats)
    }
}

/// Perplexity of one text: `exp(-mean log-prob)`.
pub fn perplexity(logprobs: &[f64]) -> std::result::Result<f64, EndpointError> {
    if logprobs.is_empty() {
        return Err(EndpointError::Fatal(
            "perplexity of empty token sequence is undefined".to_string(),
        ));
    }
    let mean = logprobs.iter().sum::<f64>() / logprobs.len() as f64;
    Ok((-mean).exp())
}

/// Corpus perplexity pooled over the concatenated token log-probs.
pub fn pooled_perplexity<'a, I>(per_text: I) -> std::result::Result<f64, EndpointError>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut sum = 0.0;
    let mut count = 0usize;
    for lp in per_text {
        sum += lp.iter().sum::<f64>();
        count += lp.len();
    }
    if count == 0 {
        return Err(EndpointError::Fatal(
            "perplexity of empty corpus is undefined".to_string(),
        ));
    }
    Ok((-(sum / count as f64)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_prompt_is_byte_stable() {
        // The capitalized "WITHOUT CHANGING ANY WORDS" phrasing measurably
        // reduces word alteration; the template is an interface contract
        // and must not drift.
        assert_eq!(
            ENGLISH_PROMPT,
            "For the given <language> sentence, restore the upper-case characters (if \
             applicable) and add punctuation WITHOUT CHANGING ANY WORDS. Answer in <language> \
             without any explanation. Here is the sentence: <input>. Here is the output:"
        );
    }

    #[test]
    fn render_default_prompt() {
        let template = PromptTemplate::english_default();
        let prompt = template.render("English", "the cat sat");
        assert!(prompt.contains("Here is the sentence: the cat sat. Here is the output:"));
        assert!(prompt.starts_with("For the given English sentence"));
        assert!(prompt.contains("WITHOUT CHANGING ANY WORDS"));
        assert!(prompt.contains("Answer in English"));
    }

    #[test]
    fn template_validation_happens_at_load() {
        assert!(PromptTemplate::new("eng", "no input placeholder <language>").is_err());
        assert!(PromptTemplate::new("eng", "<input> twice <input> <language>").is_err());
        assert!(PromptTemplate::new("eng", "no language marker: <input>").is_err());
        assert!(PromptTemplate::new("eng", "<language>: <input>").is_ok());
    }

    #[test]
    fn library_selects_registered_template() {
        let config = PromptConfig {
            display_names: BTreeMap::new(),
            templates: [(
                "deu".to_string(),
                "Setze Satzzeichen im <language>-Satz: <input>".to_string(),
            )]
            .into_iter()
            .collect(),
        };
        let library = PromptLibrary::with_config(&config).unwrap();
        let deu = library.render_for("deu", "hallo welt");
        assert_eq!(deu, "Setze Satzzeichen im German-Satz: hallo welt");
        // Unregistered languages fall back to the English template with
        // their display name.
        let fra = library.render_for("fra", "bonjour");
        assert!(fra.starts_with("For the given French sentence"));
        let unknown = library.render_for("qqq", "text");
        assert!(unknown.starts_with("For the given qqq sentence"));
    }

    #[test]
    fn bad_template_in_config_is_load_error() {
        let config = PromptConfig {
            display_names: BTreeMap::new(),
            templates: [("deu".to_string(), "missing markers".to_string())]
                .into_iter()
                .collect(),
        };
        assert!(PromptLibrary::with_config(&config).is_err());
    }

    #[test]
    fn mock_is_deterministic() {
        let library = PromptLibrary::default();
        let prompt = library.render_for("eng", "the cat sat");
        let mock = MockBackend::new(MockMode::Uppercase);
        let a = mock.complete(&prompt).unwrap();
        let b = mock.complete(&prompt).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, "THE CAT SAT");

        let sentence = MockBackend::new(MockMode::SentenceCase);
        assert_eq!(sentence.complete(&prompt).unwrap(), "The cat sat.");
    }

    #[test]
    fn retry_then_success_counts_retries() {
        let backend = FlakyBackend::new(MockBackend::new(MockMode::Echo), 2);
        let client = BatchClient::new(backend, 1, 3, 0);
        let library = PromptLibrary::default();
        let items = vec![("x".to_string(), library.render_for("eng", "hello"))];
        let (records, stats) = client.complete_batch(&items);
        assert_eq!(records[0].status, CandidateStatus::Ok);
        assert_eq!(records[0].candidate_text.as_deref(), Some("hello"));
        assert_eq!(stats.retries, 2);
        assert_eq!(stats.failed, 0);
    }

    #[test]
    fn endpoint_down_fails_open() {
        let backend = FlakyBackend::new(MockBackend::new(MockMode::Echo), u32::MAX);
        let client = BatchClient::new(backend, 2, 1, 0);
        let items = vec![
            ("a".to_string(), "p1".to_string()),
            ("b".to_string(), "p2".to_string()),
        ];
        let (records, stats) = client.complete_batch(&items);
        assert!(records.iter().all(|r| r.status == CandidateStatus::LlmFailed));
        assert!(records.iter().all(|r| r.candidate_text.is_none()));
        assert_eq!(stats.failed, 2);
    }

    #[test]
    fn batch_results_stay_in_input_order() {
        let client = BatchClient::new(MockBackend::new(MockMode::Echo), 8, 0, 0);
        let items: Vec<(String, String)> = (0..64)
            .map(|i| (format!("id{i:03}"), format!("prompt {i}")))
            .collect();
        let (records, stats) = client.complete_batch(&items);
        let ids: Vec<&str> = records.iter().map(|r| r.id.as_str()).collect();
        let expected: Vec<String> = (0..64).map(|i| format!("id{i:03}")).collect();
        assert_eq!(ids, expected.iter().map(String::as_str).collect::<Vec<_>>());
        assert_eq!(stats.completed, 64);
    }

    #[test]
    fn perplexity_formula() {
        let single = perplexity(&[-1.0]).unwrap();
        assert!((single - std::f64::consts::E).abs() < 1e-12);
        assert!(perplexity(&[]).is_err());

        let pooled = pooled_perplexity([[-1.0, -2.0].as_slice(), [-3.0].as_slice()]).unwrap();
        assert!((pooled - (2.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn mock_logprobs_deterministic_and_nonempty() {
        let mock = MockBackend::new(MockMode::Echo);
        let a = mock.logprobs("three word text").unwrap();
        let b = mock.logprobs("three word text").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert!(mock.logprobs("").is_err());
    }
}
