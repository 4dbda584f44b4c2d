use super::{EmbedError, EmbeddingProvider, EmbeddingVector, TokenEmbeddings};
use crate::corpus::tokenize;

/// Character n-gram length used by [`HashedNgramEmbedder`].
pub const NGRAM: usize = 3;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const SEED: u64 = 0x5eed_d1a1_ec70_0001;

/// Deterministic offline embedder: counts hashed character 3-grams into
/// `dim` buckets and L2-normalizes. Context-free, so equal tokens always get
/// equal token vectors.
#[derive(Debug, Clone)]
pub struct HashedNgramEmbedder {
    dim: usize,
}

impl HashedNgramEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "embedding dimension must be positive");
        HashedNgramEmbedder { dim }
    }

    /// Bucket index for one n-gram.
    pub fn bucket(&self, gram: &str) -> usize {
        let mut h = FNV_OFFSET ^ SEED;
        for b in gram.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(FNV_PRIME);
        }
        (h % self.dim as u64) as usize
    }

    /// Character n-grams of `text`; strings shorter than [`NGRAM`] yield
    /// themselves as a single gram, the empty string yields none.
    pub fn ngrams(text: &str) -> Vec<String> {
        let chars: Vec<char> = text.chars().collect();
        match chars.len() {
            0 => Vec::new(),
            n if n < NGRAM => vec![text.to_string()],
            _ => chars.windows(NGRAM).map(|w| w.iter().collect()).collect(),
        }
    }

    pub fn embed_text(&self, text: &str) -> EmbeddingVector {
        let mut counts = vec![0.0f64; self.dim];
        for gram in Self::ngrams(text) {
            counts[self.bucket(&gram)] += 1.0;
        }
        EmbeddingVector::normalized(counts)
    }
}

impl EmbeddingProvider for HashedNgramEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn model_id(&self) -> String {
        format!("hashed-char{NGRAM}gram-d{}", self.dim)
    }

    fn embed_sentences(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed_text(t)).collect())
    }

    fn embed_tokens(&self, text: &str) -> Result<TokenEmbeddings, EmbedError> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(EmbedError::EmptyInput);
        }
        let vectors = tokens.iter().map(|t| self.embed_text(t)).collect();
        Ok(TokenEmbeddings { tokens, vectors })
    }
}
