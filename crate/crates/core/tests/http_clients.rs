//! Embedding and chat clients against a local mock server.


use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use dialect_rag_testkit::http::MockServer;
use dialect_rag::embedding::{EmbedError, EmbeddingProvider, HttpEmbedder, HttpEmbedderConfig};
use dialect_rag::llm::{ApiKey, HttpTransport, LlmClient, LlmError, ModelConfig, RecordingTransport, ReplayTransport};
use dialect_rag::prompt::PromptBuilder;
use serde_json::{json, Value};

fn fake_vec(text: &str, dim: usize) -> Vec<f32> {
    let mut v = vec![0.0f32; dim];
    for (i, b) in text.bytes().enumerate() {
        v[(i + b as usize) % dim] += 1.0 + b as f32 / 255.0;
    }
    if v.iter().all(|x| *x == 0.0) {
        v[0] = 1.0;
    }
    v
}

fn embed_server(dim: usize, served_dim: usize, calls: Arc<AtomicUsize>) -> MockServer {
    MockServer::start(move |req| {
        calls.fetch_add(1, Ordering::SeqCst);
        let body: Value = serde_json::from_str(&req.body).unwrap();
        match req.path.as_str() {
            "/embed" => {
                let texts: Vec<String> = serde_json::from_value(body["texts"].clone()).unwrap();
                // reversed-length delay so later batches tend to finish first
                let delay = Duration::from_millis(20 - (texts.len() as u64).min(20));
                let vectors: Vec<Vec<f32>> = texts.iter().map(|t| fake_vec(t, served_dim)).collect();
                (200, json!({"vectors": vectors, "dim": dim, "model": "mock-encoder"}).to_string(), delay)
            }
            "/embed_tokens" => {
                let text = body["text"].as_str().unwrap();
                let pieces: Vec<String> = text
                    .split_whitespace()
                    .flat_map(|w| {
                        let chars: Vec<char> = w.chars().collect();
                        if chars.len() > 3 {
                            vec![chars[..2].iter().collect::<String>(), format!("##{}", chars[2..].iter().collect::<String>())]
                        } else {
                            vec![w.to_string()]
                        }
                    })
                    .collect();
                let vectors: Vec<Vec<f32>> = pieces.iter().map(|p| fake_vec(p, dim)).collect();
                (200, json!({"tokens": pieces, "vectors": vectors, "dim": dim}).to_string(), Duration::ZERO)
            }
            _ => (404, json!({"error": "no route"}).to_string(), Duration::ZERO),
        }
    })
}

fn embedder(url: &str, dim: usize) -> HttpEmbedder {
    HttpEmbedder::new(HttpEmbedderConfig {
        dim,
        batch_size: 3,
        max_in_flight: 4,
        timeout: Duration::from_secs(5),
        ..HttpEmbedderConfig::new(url)
    })
}

#[test]
fn embed_batches_keep_input_order_and_unit_norm() {
    let calls = Arc::new(AtomicUsize::new(0));
    let server = embed_server(16, 16, calls.clone());
    let e = embedder(&server.url, 16);
    let texts: Vec<String> = (0..10).map(|i| format!("sentence number {i} {}", "x".repeat(i))).collect();
    let out = e.embed_sentences(&texts).unwrap();
    assert_eq!(out.len(), 10);
    assert_eq!(calls.load(Ordering::SeqCst), 4);
    for (t, v) in texts.iter().zip(&out) {
        assert!((v.norm() - 1.0).abs() < 1e-6);
        let expected = fake_vec(t, 16);
        let n: f64 = expected.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
        for (a, b) in v.as_slice().iter().zip(&expected) {
            assert!((*a as f64 - *b as f64 / n).abs() < 1e-6);
        }
    }
    assert_eq!(e.model_id(), format!("http:{}:mock-encoder", server.url));
}

#[test]
fn embed_dimension_mismatch() {
    let server = embed_server(8, 8, Arc::new(AtomicUsize::new(0)));
    let e = embedder(&server.url, 16);
    let err = e.embed_sentences(&["a".to_string()]).unwrap_err();
    assert!(matches!(err, EmbedError::DimensionMismatch { expected: 16, actual: 8 }));
}

#[test]
fn embed_tokens_pools_subwords_to_words() {
    let server = embed_server(16, 16, Arc::new(AtomicUsize::new(0)));
    let e = embedder(&server.url, 16);
    let t = e.embed_tokens("ami bangla boli").unwrap();
    assert_eq!(t.tokens, vec!["ami", "bangla", "boli"]);
    assert_eq!(t.vectors.len(), 3);
    for v in &t.vectors {
        assert!((v.norm() - 1.0).abs() < 1e-6);
    }
    assert!(matches!(e.embed_tokens("   "), Err(EmbedError::EmptyInput)));
}

#[test]
fn embed_service_down() {
    let e = embedder("http://127.0.0.1:9", 16);
    assert!(matches!(e.embed_sentences(&["a".to_string()]), Err(EmbedError::ProviderUnavailable(_))));
}

fn completion(content: &str) -> String {
    json!({"choices":[{"message":{"role":"assistant","content":content},"finish_reason":"stop"}],
           "usage":{"prompt_tokens":5,"completion_tokens":1}})
    .to_string()
}

fn model_cfg(url: &str) -> ModelConfig {
    let mut cfg = ModelConfig::new(format!("{url}/v1/chat/completions"), "mock-model");
    cfg.backoff_base = Duration::from_millis(5);
    cfg.api_key = ApiKey::new("sk-secret-value-123");
    cfg.timeout = Duration::from_secs(5);
    cfg
}

#[test]
fn chat_retries_server_errors_then_succeeds() {
    let count = Arc::new(AtomicUsize::new(0));
    let auth = Arc::new(Mutex::new(Vec::new()));
    let (c, a) = (count.clone(), auth.clone());
    let server = MockServer::start(move |req| {
        a.lock().unwrap().push(req.header("authorization").unwrap_or("").to_string());
        let n = c.fetch_add(1, Ordering::SeqCst);
        if n < 2 {
            (500, "{\"error\":{\"message\":\"boom\"}}".into(), Duration::ZERO)
        } else {
            (200, completion("আমি বাড়ি যাইয়ুম"), Duration::ZERO)
        }
    });
    let client = LlmClient::new(HttpTransport::new(Duration::from_secs(5)), model_cfg(&server.url));
    let prompt = PromptBuilder::default().build_zero_shot("আমি বাড়ি যাব", "Sylhet").unwrap();
    let r = client.translate(&prompt).unwrap();
    assert_eq!(r.output_text, "আমি বাড়ি যাইয়ুম");
    assert_eq!(r.attempts, 3);
    assert_eq!(auth.lock().unwrap()[0], "Bearer sk-secret-value-123");
}

#[test]
fn chat_auth_error_not_retried() {
    let count = Arc::new(AtomicUsize::new(0));
    let c = count.clone();
    let server = MockServer::start(move |_| {
        c.fetch_add(1, Ordering::SeqCst);
        (401, "{\"error\":{\"message\":\"bad key sk-secret-value-123\"}}".into(), Duration::ZERO)
    });
    let client = LlmClient::new(HttpTransport::new(Duration::from_secs(5)), model_cfg(&server.url));
    let prompt = PromptBuilder::default().build_zero_shot("x", "Sylhet").unwrap();
    assert_eq!(client.translate(&prompt).unwrap_err(), LlmError::AuthError { status: 401 });
    assert_eq!(count.load(Ordering::SeqCst), 1);
}

#[test]
fn chat_timeout_is_reported() {
    let server = MockServer::start(|_| (200, completion("late"), Duration::from_millis(800)));
    let mut cfg = model_cfg(&server.url);
    cfg.max_retries = 1;
    let client = LlmClient::new(HttpTransport::new(Duration::from_millis(150)), cfg);
    let prompt = PromptBuilder::default().build_zero_shot("x", "Sylhet").unwrap();
    assert_eq!(client.translate(&prompt).unwrap_err(), LlmError::Timeout { attempts: 2 });
}

#[test]
fn batch_order_survives_random_delays_and_records_for_replay() {
    let server = MockServer::start(|req| {
        let body: Value = serde_json::from_str(&req.body).unwrap();
        let content = body["messages"][0]["content"].as_str().unwrap().to_string();
        let tail = content.lines().rev().find(|l| !l.trim().is_empty()).unwrap_or("").to_string();
        let delay = Duration::from_millis(content.len() as u64 * 7 % 40);
        (200, completion(&format!("echo {}", tail.len())), delay)
    });
    let cfg = model_cfg(&server.url);
    let builder = PromptBuilder::default();
    let prompts: Vec<_> = (0..12)
        .map(|i| builder.build_zero_shot(&format!("input {}", "w ".repeat(i)), "Sylhet").unwrap())
        .collect();
    let recorder = RecordingTransport::new(HttpTransport::new(Duration::from_secs(5)));
    let live = LlmClient::new(recorder, cfg.clone());
    let first: Vec<String> = live.translate_batch(&prompts, 4).into_iter().map(|r| r.unwrap().output_text).collect();
    let sequential: Vec<String> = prompts.iter().map(|p| live.translate(p).unwrap().output_text).collect();
    assert_eq!(first, sequential);

    let entries = live.transport().entries();
    assert!(entries.iter().all(|e| !e.body.to_string().contains("sk-secret-value-123")));
    drop(server);
    let replay = LlmClient::new(ReplayTransport::new(entries), cfg);
    let again: Vec<String> = replay.translate_batch(&prompts, 3).into_iter().map(|r| r.unwrap().output_text).collect();
    assert_eq!(again, first);
}
