//! Request transports: live HTTP, fixture replay, and recording.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ChatRequest, ModelConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("no replay fixture for request {0}")]
    NoFixture(String),
}

impl TransportError {
    pub fn is_retryable(&self) -> bool {
        !matches!(self, TransportError::NoFixture(_))
    }
}

pub trait Transport: Send + Sync {
    fn send(&self, request: &ChatRequest, cfg: &ModelConfig) -> Result<HttpReply, TransportError>;

    /// Replay transports disable backoff jitter.
    fn is_replay(&self) -> bool {
        false
    }
}

impl<T: Transport + ?Sized> Transport for &T {
    fn send(&self, request: &ChatRequest, cfg: &ModelConfig) -> Result<HttpReply, TransportError> {
        (**self).send(request, cfg)
    }

    fn is_replay(&self) -> bool {
        (**self).is_replay()
    }
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn send(&self, request: &ChatRequest, cfg: &ModelConfig) -> Result<HttpReply, TransportError> {
        (**self).send(request, cfg)
    }

    fn is_replay(&self) -> bool {
        (**self).is_replay()
    }
}

/// SHA-256 (hex) of the canonical request JSON. The API key is not part of
/// the request body and never enters the hash.
pub fn request_hash(request: &ChatRequest) -> String {
    let json = serde_json::to_string(request).expect("request serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

/// One line of a fixture file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub request_hash: String,
    pub status: u16,
    /// Response body: a JSON value, or a string holding a raw body.
    pub body: serde_json::Value,
    #[serde(default)]
    pub delay_ms: u64,
}

impl FixtureEntry {
    pub fn new(request_hash: String, status: u16, body: &str, delay_ms: u64) -> Self {
        let body = serde_json::from_str(body).unwrap_or_else(|_| serde_json::Value::String(body.to_string()));
        FixtureEntry { request_hash, status, body, delay_ms }
    }

    fn body_text(&self) -> String {
        match &self.body {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        }
    }
}

pub fn read_fixtures(path: &Path) -> std::io::Result<Vec<FixtureEntry>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| {
                std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}:{}: {e}", path.display(), i + 1))
            })
        })
        .collect()
}

pub fn write_fixtures(path: &Path, entries: &[FixtureEntry]) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for e in entries {
        serde_json::to_writer(&mut f, e)?;
        f.write_all(b"\n")?;
    }
    f.flush()
}

/// Serves responses from fixtures keyed by request hash. Entries sharing a
/// hash are served in file order; the last one repeats once exhausted.
pub struct ReplayTransport {
    scripts: HashMap<String, Mutex<(Vec<FixtureEntry>, usize)>>,
}

impl ReplayTransport {
    pub fn new(entries: Vec<FixtureEntry>) -> Self {
        let mut grouped: HashMap<String, Vec<FixtureEntry>> = HashMap::new();
        for e in entries {
            grouped.entry(e.request_hash.clone()).or_default().push(e);
        }
        let scripts = grouped.into_iter().map(|(k, v)| (k, Mutex::new((v, 0)))).collect();
        ReplayTransport { scripts }
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        Ok(Self::new(read_fixtures(path)?))
    }
}

impl Transport for ReplayTransport {
    fn send(&self, request: &ChatRequest, _cfg: &ModelConfig) -> Result<HttpReply, TransportError> {
        let hash = request_hash(request);
        let script = self.scripts.get(&hash).ok_or_else(|| TransportError::NoFixture(hash.clone()))?;
        let entry = {
            let mut guard = script.lock().unwrap();
            let (entries, cursor) = &mut *guard;
            let e = entries[(*cursor).min(entries.len() - 1)].clone();
            *cursor += 1;
            e
        };
        if entry.delay_ms > 0 {
            std::thread::sleep(Duration::from_millis(entry.delay_ms));
        }
        Ok(HttpReply { status: entry.status, body: entry.body_text() })
    }

    fn is_replay(&self) -> bool {
        true
    }
}

/// Wraps a transport and keeps every exchange as a fixture entry.
pub struct RecordingTransport<T> {
    inner: T,
    log: Mutex<Vec<FixtureEntry>>,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T) -> Self {
        RecordingTransport { inner, log: Mutex::new(Vec::new()) }
    }

    pub fn entries(&self) -> Vec<FixtureEntry> {
        self.log.lock().unwrap().clone()
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        write_fixtures(path, &self.entries())
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn send(&self, request: &ChatRequest, cfg: &ModelConfig) -> Result<HttpReply, TransportError> {
        let started = std::time::Instant::now();
        let reply = self.inner.send(request, cfg)?;
        let delay_ms = started.elapsed().as_millis() as u64;
        let body = cfg.api_key.redact(&reply.body);
        self.log.lock().unwrap().push(FixtureEntry::new(request_hash(request), reply.status, &body, delay_ms));
        Ok(reply)
    }
}

/// Live chat-completions endpoint.
#[cfg(feature = "net")]
pub struct HttpTransport {
    agent: ureq::Agent,
}

#[cfg(feature = "net")]
impl HttpTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpTransport { agent }
    }
}

#[cfg(feature = "net")]
impl Transport for HttpTransport {
    fn send(&self, request: &ChatRequest, cfg: &ModelConfig) -> Result<HttpReply, TransportError> {
        let mut req = self.agent.post(&cfg.endpoint).header("Content-Type", "application/json");
        if let Some(key) = cfg.api_key.expose() {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let body = serde_json::to_string(request).expect("request serializes");
        let map_err = |e: ureq::Error| match e {
            ureq::Error::Timeout(_) => TransportError::Timeout,
            other => TransportError::Connect(cfg.api_key.redact(&other.to_string())),
        };
        let mut resp = req.send(body.as_bytes()).map_err(map_err)?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(map_err)?;
        Ok(HttpReply { status, body })
    }
}
