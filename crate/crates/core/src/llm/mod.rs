//! Chat-completion client: one user message per prompt, retries with
//! exponential backoff, and record/replay transports for offline runs.

mod transport;

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::prompt::FewShotPrompt;

#[cfg(feature = "net")]
pub use transport::HttpTransport;
pub use transport::{
    read_fixtures, request_hash, write_fixtures, FixtureEntry, HttpReply, RecordingTransport, ReplayTransport,
    Transport, TransportError,
};

/// Bearer token. Never printed by `Debug`/`Display`.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct ApiKey(Option<String>);

impl ApiKey {
    pub fn new(key: impl Into<String>) -> Self {
        let key = key.into();
        ApiKey((!key.is_empty()).then_some(key))
    }

    pub fn none() -> Self {
        ApiKey(None)
    }

    pub fn expose(&self) -> Option<&str> {
        self.0.as_deref()
    }

    /// SHA-256 of the key, hex; empty when no key is set.
    pub fn fingerprint(&self) -> String {
        self.0.as_ref().map(|k| hex::encode(Sha256::digest(k.as_bytes()))).unwrap_or_default()
    }

    /// Replaces any occurrence of the key in `text`.
    pub fn redact(&self, text: &str) -> String {
        match &self.0 {
            Some(k) if k.len() >= 4 => text.replace(k.as_str(), "[redacted]"),
            _ => text.to_string(),
        }
    }
}

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.0.is_some() { "ApiKey([redacted])" } else { "ApiKey(None)" })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Full chat-completions URL.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout: Duration,
    pub max_retries: u32,
    pub api_key: ApiKey,
    pub backoff_base: Duration,
    pub backoff_factor: f64,
}

impl ModelConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        ModelConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            temperature: 0.0,
            max_tokens: 256,
            timeout: Duration::from_secs(60),
            max_retries: 3,
            api_key: ApiKey::none(),
            backoff_base: Duration::from_millis(500),
            backoff_factor: 2.0,
        }
    }

    /// Reads `LLM_URL`, `LLM_API_KEY` and `LLM_MODEL`.
    pub fn from_env() -> Self {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.trim().is_empty());
        let mut cfg = ModelConfig::new(
            var("LLM_URL").unwrap_or_else(|| "http://localhost:8000/v1/chat/completions".into()),
            var("LLM_MODEL").unwrap_or_else(|| "unspecified".into()),
        );
        cfg.api_key = var("LLM_API_KEY").map(ApiKey::new).unwrap_or_default();
        cfg
    }

    /// Hash of every field that influences a request, excluding the key itself.
    pub fn config_hash(&self) -> String {
        let s = format!(
            "{}|{}|{}|{}|{}|{}|{}",
            self.endpoint,
            self.model,
            self.temperature,
            self.max_tokens,
            self.timeout.as_millis(),
            self.max_retries,
            self.api_key.fingerprint()
        );
        hex::encode(Sha256::digest(s.as_bytes()))
    }

    fn validate(&self) -> Result<(), LlmError> {
        // written this way so NaN is rejected too
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.temperature >= 0.0) {
            return Err(LlmError::Config(format!("temperature must be >= 0, got {}", self.temperature)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Chat-completions request body. Field order is fixed, which keeps
/// [`request_hash`] stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn for_prompt(prompt: &FewShotPrompt, cfg: &ModelConfig) -> Self {
        ChatRequest {
            model: cfg.model.clone(),
            messages: vec![ChatMessage { role: "user".into(), content: prompt.text.clone() }],
            temperature: cfg.temperature,
            max_tokens: cfg.max_tokens,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationResult {
    pub output_text: String,
    pub raw_output: String,
    pub prompt_id: String,
    pub model: String,
    pub latency: Duration,
    pub attempts: u32,
    pub usage: Option<Usage>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LlmError {
    #[error("authentication failed (HTTP {status})")]
    AuthError { status: u16 },
    #[error("rate limited; gave up after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("request timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("server error HTTP {status} after {attempts} attempts")]
    ServerError { status: u16, attempts: u32 },
    #[error("HTTP {status}: {message}")]
    Http { status: u16, message: String },
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { message: String, attempts: u32 },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("response refused or filtered: {0}")]
    ContentFiltered(String),
    #[error("replay: {0}")]
    Replay(String),
    #[error("invalid model config: {0}")]
    Config(String),
}

impl LlmError {
    /// Failures caused by the network or the remote service.
    pub fn is_network(&self) -> bool {
        !matches!(self, LlmError::Replay(_) | LlmError::Config(_))
    }
}

#[derive(Deserialize)]
struct CompletionBody {
    choices: Option<Vec<Choice>>,
    usage: Option<UsageBody>,
}

#[derive(Deserialize)]
struct Choice {
    message: Option<ChoiceMessage>,
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
    refusal: Option<String>,
}

#[derive(Deserialize)]
struct UsageBody {
    prompt_tokens: Option<u64>,
    completion_tokens: Option<u64>,
}

/// First nonempty line, trimmed, with one layer of matching quotes removed.
pub fn postprocess_output(raw: &str) -> String {
    let line = raw.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    const QUOTES: [(char, char); 6] = [('"', '"'), ('\'', '\''), ('“', '”'), ('‘', '’'), ('«', '»'), ('「', '」')];
    for (open, close) in QUOTES {
        if let Some(inner) = line.strip_prefix(open).and_then(|s| s.strip_suffix(close)) {
            return inner.trim().to_string();
        }
    }
    line.to_string()
}

fn parse_completion(body: &str) -> Result<(String, Option<Usage>), LlmError> {
    let parsed: CompletionBody =
        serde_json::from_str(body).map_err(|e| LlmError::MalformedResponse(format!("invalid JSON: {e}")))?;
    let choice = parsed
        .choices
        .and_then(|c| c.into_iter().next())
        .ok_or_else(|| LlmError::MalformedResponse("no choices".into()))?;
    let message = choice.message.ok_or_else(|| LlmError::MalformedResponse("choice without message".into()))?;
    if let Some(refusal) = message.refusal.filter(|r| !r.is_empty()) {
        return Err(LlmError::ContentFiltered(refusal));
    }
    if choice.finish_reason.as_deref() == Some("content_filter") {
        return Err(LlmError::ContentFiltered("finish_reason=content_filter".into()));
    }
    let content = message.content.ok_or_else(|| LlmError::MalformedResponse("message without content".into()))?;
    let usage = parsed.usage.map(|u| Usage {
        prompt_tokens: u.prompt_tokens.unwrap_or(0),
        completion_tokens: u.completion_tokens.unwrap_or(0),
    });
    Ok((content, usage))
}

fn error_message(body: &str) -> String {
    let v: Option<serde_json::Value> = serde_json::from_str(body).ok();
    let msg = v.as_ref().and_then(|v| {
        v.get("error").and_then(|e| e.as_str().map(String::from).or_else(|| e.get("message")?.as_str().map(String::from)))
    });
    let mut msg = msg.unwrap_or_else(|| body.to_string());
    if msg.len() > 300 {
        let cut = (0..=300).rev().find(|&i| msg.is_char_boundary(i)).unwrap_or(0);
        msg.truncate(cut);
    }
    msg
}

pub struct LlmClient<T> {
    transport: T,
    cfg: ModelConfig,
}

impl<T: Transport> LlmClient<T> {
    pub fn new(transport: T, cfg: ModelConfig) -> Self {
        LlmClient { transport, cfg }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    fn backoff(&self, retry: u32) -> Duration {
        let base = self.cfg.backoff_base.as_secs_f64() * self.cfg.backoff_factor.powi(retry as i32 - 1);
        #[cfg(feature = "net")]
        let base = if self.transport.is_replay() { base } else { base * rand::random_range(0.5..1.5) };
        Duration::from_secs_f64(base.max(0.0))
    }

    pub fn translate(&self, prompt: &FewShotPrompt) -> Result<TranslationResult, LlmError> {
        self.cfg.validate()?;
        let request = ChatRequest::for_prompt(prompt, &self.cfg);
        let started = Instant::now();
        let max_attempts = 1 + self.cfg.max_retries;
        let redact = |s: &str| self.cfg.api_key.redact(s);
        let mut attempts = 0u32;
        loop {
            attempts += 1;
            let give_up = attempts >= max_attempts;
            let outcome = self.transport.send(&request, &self.cfg);
            let retry_err = match outcome {
                Err(TransportError::NoFixture(h)) => return Err(LlmError::Replay(format!("no fixture for request {h}"))),
                Err(TransportError::Timeout) => LlmError::Timeout { attempts },
                Err(TransportError::Connect(m)) => LlmError::Transport { message: redact(&m), attempts },
                Ok(reply) => match reply.status {
                    200..=299 => {
                        let (raw, usage) = parse_completion(&reply.body).map_err(|e| match e {
                            LlmError::MalformedResponse(m) => LlmError::MalformedResponse(redact(&m)),
                            other => other,
                        })?;
                        return Ok(TranslationResult {
                            output_text: postprocess_output(&raw),
                            raw_output: raw,
                            prompt_id: prompt.prompt_id(),
                            model: self.cfg.model.clone(),
                            latency: started.elapsed(),
                            attempts,
                            usage,
                        });
                    }
                    401 | 403 => return Err(LlmError::AuthError { status: reply.status }),
                    429 => LlmError::RateLimited { attempts },
                    500..=599 => LlmError::ServerError { status: reply.status, attempts },
                    status => return Err(LlmError::Http { status, message: redact(&error_message(&reply.body)) }),
                },
            };
            if give_up {
                return Err(retry_err);
            }
            log::debug!("attempt {attempts} failed ({retry_err}); retrying");
            std::thread::sleep(self.backoff(attempts));
        }
    }

    /// Translates all prompts with at most `parallelism` requests in flight.
    /// Results come back in input order; failures stay per item.
    pub fn translate_batch(
        &self,
        prompts: &[FewShotPrompt],
        parallelism: usize,
    ) -> Vec<Result<TranslationResult, LlmError>> {
        let slots: Vec<Mutex<Option<Result<TranslationResult, LlmError>>>> =
            prompts.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = parallelism.max(1).min(prompts.len());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= prompts.len() {
                        break;
                    }
                    let r = self.translate(&prompts[i]);
                    *slots[i].lock().unwrap() = Some(r);
                });
            }
        });
        slots.into_iter().map(|s| s.into_inner().unwrap().expect("every prompt processed")).collect()
    }
}
