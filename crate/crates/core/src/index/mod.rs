//! Flat dense index, Okapi BM25 sparse index, and their on-disk container.

mod dense;
mod persist;
mod sparse;

use std::collections::{BTreeSet, HashSet};

use thiserror::Error;

use crate::corpus::{tokenize, CorpusRecord};
use crate::embedding::{EmbedError, EmbeddingProvider};

pub use dense::DenseIndex;
pub use persist::{FORMAT_VERSION, MAGIC};
pub use sparse::{Bm25Params, SparseIndex};

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("row {row} is not unit-norm (norm {norm})")]
    NotUnitNorm { row: usize, norm: f64 },
    #[error("not an index file (bad magic)")]
    BadMagic,
    #[error("unsupported index format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("index checksum mismatch")]
    ChecksumMismatch,
    #[error("corrupt index: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// One search result; `row` indexes the record list the index was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchHit {
    pub row: usize,
    pub id: String,
    pub score: f64,
}

/// Sorts by score descending, then id ascending, and keeps the first `k`.
pub(crate) fn rank_hits(mut hits: Vec<SearchHit>, k: usize) -> Vec<SearchHit> {
    hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id)));
    hits.truncate(k);
    hits
}

/// Dense and sparse indices over the same records, plus the records.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridIndex {
    pub records: Vec<CorpusRecord>,
    pub dense: DenseIndex,
    pub sparse: SparseIndex,
    pub embedder: String,
}

impl HybridIndex {
    pub fn build(records: Vec<CorpusRecord>, provider: &dyn EmbeddingProvider) -> Result<Self, IndexError> {
        Self::build_with(records, provider, Bm25Params::default())
    }

    pub fn build_with(
        records: Vec<CorpusRecord>,
        provider: &dyn EmbeddingProvider,
        params: Bm25Params,
    ) -> Result<Self, IndexError> {
        if records.is_empty() {
            return Err(IndexError::EmptyCorpus);
        }
        let mut seen = HashSet::new();
        if let Some(dup) = records.iter().find(|r| !seen.insert(r.id.as_str())) {
            return Err(IndexError::DuplicateId(dup.id.clone()));
        }
        let dense = DenseIndex::build(&records, provider)?;
        let docs: Vec<Vec<String>> = records.iter().map(|r| tokenize(r.index_text())).collect();
        let ids = records.iter().map(|r| r.id.clone()).collect();
        let sparse = SparseIndex::build(ids, &docs, params);
        Ok(HybridIndex { records, dense, sparse, embedder: provider.model_id() })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dense.dim()
    }

    pub fn districts(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.district.as_str()).collect()
    }

    pub fn has_district(&self, district: &str) -> bool {
        self.records.iter().any(|r| r.district == district)
    }
}
