//! HTTP client for the companion embedding service.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{pool_to_words, EmbedError, EmbeddingProvider, EmbeddingVector, TokenEmbeddings, DEFAULT_DIM};
use crate::corpus::tokenize;

#[derive(Debug, Clone)]
pub struct HttpEmbedderConfig {
    pub base_url: String,
    pub dim: usize,
    /// Texts per `/embed` request.
    pub batch_size: usize,
    /// Concurrent requests in flight.
    pub max_in_flight: usize,
    pub timeout: Duration,
}

impl HttpEmbedderConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        HttpEmbedderConfig {
            base_url: base_url.into(),
            dim: DEFAULT_DIM,
            batch_size: 64,
            max_in_flight: 4,
            timeout: Duration::from_secs(60),
        }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f32>>,
    dim: usize,
    model: String,
}

#[derive(Serialize)]
struct EmbedTokensRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct EmbedTokensResponse {
    tokens: Vec<String>,
    vectors: Vec<Vec<f32>>,
}

#[derive(Deserialize)]
struct ErrorBody {
    error: String,
}

pub struct HttpEmbedder {
    cfg: HttpEmbedderConfig,
    agent: ureq::Agent,
    model: Mutex<Option<String>>,
}

impl HttpEmbedder {
    pub fn new(cfg: HttpEmbedderConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpEmbedder { cfg, agent, model: Mutex::new(None) }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.cfg.base_url.trim_end_matches('/'), path)
    }

    fn post<B: Serialize, R: for<'de> Deserialize<'de>>(&self, path: &str, body: &B) -> Result<R, EmbedError> {
        let unavailable = |e: String| EmbedError::ProviderUnavailable(e);
        let mut resp = self.agent.post(&self.url(path)).send_json(body).map_err(|e| unavailable(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| unavailable(e.to_string()))?;
        if status >= 400 {
            let msg = serde_json::from_str::<ErrorBody>(&text).map(|b| b.error).unwrap_or(text);
            return Err(unavailable(format!("HTTP {status}: {msg}")));
        }
        serde_json::from_str(&text).map_err(|e| unavailable(format!("malformed response: {e}")))
    }

    fn embed_chunk(&self, chunk: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let resp: EmbedResponse = self.post("/embed", &EmbedRequest { texts: chunk })?;
        if resp.dim != self.cfg.dim {
            return Err(EmbedError::DimensionMismatch { expected: self.cfg.dim, actual: resp.dim });
        }
        if resp.vectors.len() != chunk.len() {
            return Err(EmbedError::ProviderUnavailable(format!(
                "requested {} vectors, received {}",
                chunk.len(),
                resp.vectors.len()
            )));
        }
        *self.model.lock().unwrap() = Some(resp.model);
        resp.vectors
            .into_iter()
            .map(|v| {
                if v.len() != self.cfg.dim {
                    return Err(EmbedError::DimensionMismatch { expected: self.cfg.dim, actual: v.len() });
                }
                Ok(EmbeddingVector::normalized(v.into_iter().map(f64::from).collect()))
            })
            .collect()
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn dim(&self) -> usize {
        self.cfg.dim
    }

    fn model_id(&self) -> String {
        let model = self.model.lock().unwrap().clone().unwrap_or_else(|| "unknown".into());
        format!("http:{}:{model}", self.cfg.base_url)
    }

    fn embed_sentences(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let chunks: Vec<&[String]> = texts.chunks(self.cfg.batch_size.max(1)).collect();
        type Slot = Mutex<Option<Result<Vec<EmbeddingVector>, EmbedError>>>;
        let results: Vec<Slot> =
            chunks.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = self.cfg.max_in_flight.max(1).min(chunks.len());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= chunks.len() {
                        break;
                    }
                    *results[i].lock().unwrap() = Some(self.embed_chunk(chunks[i]));
                });
            }
        });
        let mut out = Vec::with_capacity(texts.len());
        for slot in results {
            out.extend(slot.into_inner().unwrap().expect("every chunk processed")?);
        }
        Ok(out)
    }

    fn embed_tokens(&self, text: &str) -> Result<TokenEmbeddings, EmbedError> {
        let words = tokenize(text);
        if words.is_empty() {
            return Err(EmbedError::EmptyInput);
        }
        let resp: EmbedTokensResponse = self.post("/embed_tokens", &EmbedTokensRequest { text })?;
        if let Some(v) = resp.vectors.iter().find(|v| v.len() != self.cfg.dim) {
            return Err(EmbedError::DimensionMismatch { expected: self.cfg.dim, actual: v.len() });
        }
        let vectors = if resp.tokens == words {
            resp.vectors
                .into_iter()
                .map(|v| EmbeddingVector::normalized(v.into_iter().map(f64::from).collect()))
                .collect()
        } else {
            log::debug!("re-aligning {} subwords onto {} words", resp.tokens.len(), words.len());
            pool_to_words(&words, &resp.tokens, &resp.vectors)?
        };
        Ok(TokenEmbeddings { tokens: words, vectors })
    }
}
