//! Sentence and token embedding providers.

mod align;
#[cfg(feature = "net")]
mod client;
mod hashed;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use align::pool_to_words;
#[cfg(feature = "net")]
pub use client::{HttpEmbedder, HttpEmbedderConfig};
pub use hashed::{HashedNgramEmbedder, NGRAM};

pub const DEFAULT_DIM: usize = 768;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("provider returned {vectors} vectors for {tokens} tokens")]
    TokenizationMismatch { tokens: usize, vectors: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("vector is not unit-norm (norm {0})")]
    NotUnitNorm(f64),
}

/// A unit-norm embedding. Construction via [`EmbeddingVector::normalized`]
/// guarantees the invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    /// L2-normalizes `values`; the zero vector maps to the first basis vector.
    pub fn normalized(values: Vec<f64>) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            let mut e0 = vec![0.0f32; values.len().max(1)];
            e0[0] = 1.0;
            return EmbeddingVector(e0);
        }
        EmbeddingVector(values.iter().map(|v| (v / norm) as f32).collect())
    }

    /// Wraps values that are expected to be unit-norm already (within 1e-5).
    pub fn from_unit(values: Vec<f32>) -> Result<Self, EmbedError> {
        let v = EmbeddingVector(values);
        let norm = v.norm();
        if (norm - 1.0).abs() > 1e-5 {
            return Err(EmbedError::NotUnitNorm(norm));
        }
        Ok(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &EmbeddingVector) -> f64 {
        dot(&self.0, &other.0)
    }
}

/// Dot product accumulated in f64, in index order.
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

/// Word tokens paired with one unit vector each.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbeddings {
    pub tokens: Vec<String>,
    pub vectors: Vec<EmbeddingVector>,
}

pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;

    /// Identifier recorded in run manifests.
    fn model_id(&self) -> String;

    fn embed_sentences(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError>;

    /// One vector per token of `corpus::tokenize(text)`.
    fn embed_tokens(&self, text: &str) -> Result<TokenEmbeddings, EmbedError>;

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut v = self.embed_sentences(&[text.to_string()])?;
        v.pop().ok_or_else(|| EmbedError::ProviderUnavailable("empty response".into()))
    }
}

/// Selects the HTTP client when `EMBED_URL` is set, else the hashed embedder.
#[cfg(feature = "net")]
pub fn provider_from_env(dim: usize) -> Box<dyn EmbeddingProvider> {
    match std::env::var("EMBED_URL") {
        Ok(url) if !url.trim().is_empty() => {
            Box::new(HttpEmbedder::new(HttpEmbedderConfig { dim, ..HttpEmbedderConfig::new(url) }))
        }
        _ => Box::new(HashedNgramEmbedder::new(dim)),
    }
}
