//! Wire-level tests for the HTTP completion backend against a scripted
//! localhost server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};

use corpora_core::error::EndpointError;
use corpora_core::llm::{BatchClient, CompletionBackend, EndpointConfig, HttpBackend};

/// Minimal HTTP/1.1 responder: serves one scripted response per connection.
struct ScriptedServer {
    address: String,
    seen_auth: Arc<Mutex<Vec<Option<String>>>>,
    handle: Option<std::thread::JoinHandle<()>>,
}

impl ScriptedServer {
    fn start(responses: Vec<(u16, String)>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let address = format!("http://{}", listener.local_addr().unwrap());
        let seen_auth = Arc::new(Mutex::new(Vec::new()));
        let seen = Arc::clone(&seen_auth);
        let handle = std::thread::spawn(move || {
            for (status, body) in responses {
                let (mut stream, _) = match listener.accept() {
                    Ok(conn) => conn,
                    Err(_) => return,
                };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut content_length = 0usize;
                let mut auth = None;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).is_err() || line == "\r\n" || line.is_empty() {
                        break;
                    }
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        content_length = v.trim().parse().unwrap_or(0);
                    }
                    if let Some(v) = line.strip_prefix("authorization:") {
                        auth = Some(v.trim().to_string());
                    } else if let Some(v) = line.strip_prefix("Authorization:") {
                        auth = Some(v.trim().to_string());
                    }
                }
                let mut payload = vec![0u8; content_length];
                let _ = reader.read_exact(&mut payload);
                seen.lock().unwrap().push(auth);
                let reason = if status == 200 { "OK" } else { "Error" };
                let response = format!(
                    "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.write_all(response.as_bytes());
            }
        });
        ScriptedServer {
            address,
            seen_auth,
            handle: Some(handle),
        }
    }
}

impl Drop for ScriptedServer {
    fn drop(&mut self) {
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn config(base_url: &str) -> EndpointConfig {
    EndpointConfig {
        base_url: base_url.to_string(),
        model_name: "test-model".to_string(),
        auth_token: Some("sekrit".to_string()),
        timeout_sec: 5.0,
        max_in_flight: 1,
        max_retries: 3,
        retry_backoff_ms: 1,
    }
}

fn chat_body(text: &str) -> String {
    serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": text}}]
    })
    .to_string()
}

#[test]
fn completion_round_trip() {
    let server = ScriptedServer::start(vec![(200, chat_body("Hello, world."))]);
    let backend = HttpBackend::new(config(&server.address));
    let text = backend.complete("restore: hello world").unwrap();
    assert_eq!(text, "Hello, world.");
    let auth = server.seen_auth.lock().unwrap();
    assert_eq!(auth[0].as_deref(), Some("Bearer sekrit"));
}

#[test]
fn transient_failures_are_retried_then_succeed() {
    let server = ScriptedServer::start(vec![
        (500, "{}".to_string()),
        (503, "{}".to_string()),
        (200, chat_body("Recovered.")),
    ]);
    let backend = HttpBackend::new(config(&server.address));
    let client = BatchClient::new(backend, 1, 3, 1);
    let (text, retries) = client.complete_with_retry("prompt").unwrap();
    assert_eq!(text, "Recovered.");
    assert_eq!(retries, 2);
}

#[test]
fn exhausted_retries_fail_open_in_batch() {
    let server = ScriptedServer::start(vec![
        (500, "{}".to_string()),
        (500, "{}".to_string()),
        (500, "{}".to_string()),
    ]);
    let backend = HttpBackend::new(config(&server.address));
    let client = BatchClient::new(backend, 1, 2, 1);
    let (records, stats) = client.complete_batch(&[("a".to_string(), "p".to_string())]);
    assert_eq!(records[0].status, corpora_core::llm::CandidateStatus::LlmFailed);
    assert!(records[0].candidate_text.is_none());
    assert_eq!(stats.failed, 1);
}

#[test]
fn missing_logprob_support_is_feature_unavailable() {
    let server = ScriptedServer::start(vec![(404, "{}".to_string())]);
    let backend = HttpBackend::new(config(&server.address));
    match backend.logprobs("some text") {
        Err(EndpointError::FeatureUnavailable(_)) => {}
        other => panic!("expected FeatureUnavailable, got {other:?}"),
    }
}

#[test]
fn logprobs_skip_null_first_token() {
    let body = serde_json::json!({
        "choices": [{"logprobs": {"token_logprobs": [null, -1.0, -2.0, -0.5]}}]
    })
    .to_string();
    let server = ScriptedServer::start(vec![(200, body)]);
    let backend = HttpBackend::new(config(&server.address));
    let lp = backend.logprobs("three token text").unwrap();
    assert_eq!(lp, vec![-1.0, -2.0, -0.5]);
}

#[test]
fn malformed_payload_is_fatal_not_retried() {
    let server = ScriptedServer::start(vec![(200, r#"{"unexpected": true}"#.to_string())]);
    let backend = HttpBackend::new(config(&server.address));
    let client = BatchClient::new(backend, 1, 5, 1);
    match client.complete_with_retry("prompt") {
        Err(EndpointError::Fatal(_)) => {}
        other => panic!("expected fatal error, got {other:?}"),
    }
}
