use super::{rank_hits, IndexError, SearchHit};
use crate::corpus::CorpusRecord;
use crate::embedding::{dot, EmbeddingProvider, EmbeddingVector};

const UNIT_TOLERANCE: f64 = 1e-5;

/// Exact inner-product search over unit-norm rows (row-major `f32`).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseIndex {
    dim: usize,
    matrix: Vec<f32>,
    ids: Vec<String>,
}

impl DenseIndex {
    /// Embeds each record's index text (structured form for pairs).
    pub fn build(records: &[CorpusRecord], provider: &dyn EmbeddingProvider) -> Result<Self, IndexError> {
        if records.is_empty() {
            return Err(IndexError::EmptyCorpus);
        }
        let texts: Vec<String> = records.iter().map(|r| r.index_text().to_string()).collect();
        let vectors = provider.embed_sentences(&texts)?;
        let ids = records.iter().map(|r| r.id.clone()).collect();
        Self::from_vectors(provider.dim(), ids, vectors)
    }

    pub fn from_vectors(dim: usize, ids: Vec<String>, vectors: Vec<EmbeddingVector>) -> Result<Self, IndexError> {
        if vectors.is_empty() {
            return Err(IndexError::EmptyCorpus);
        }
        if vectors.len() != ids.len() {
            return Err(IndexError::Corrupt(format!("{} ids for {} vectors", ids.len(), vectors.len())));
        }
        let mut matrix = Vec::with_capacity(dim * vectors.len());
        for v in vectors {
            if v.dim() != dim {
                return Err(IndexError::DimensionMismatch { expected: dim, actual: v.dim() });
            }
            matrix.extend(v.into_inner());
        }
        Self::from_raw(dim, ids, matrix)
    }

    pub(crate) fn from_raw(dim: usize, ids: Vec<String>, matrix: Vec<f32>) -> Result<Self, IndexError> {
        if dim == 0 || matrix.len() != dim * ids.len() {
            return Err(IndexError::Corrupt("matrix shape does not match ids".into()));
        }
        for (row, values) in matrix.chunks(dim).enumerate() {
            let norm = dot(values, values).sqrt();
            if (norm - 1.0).abs() > UNIT_TOLERANCE {
                return Err(IndexError::NotUnitNorm { row, norm });
            }
        }
        Ok(DenseIndex { dim, matrix, ids })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.matrix[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn matrix(&self) -> &[f32] {
        &self.matrix
    }

    /// Dot product of the query with every row.
    pub fn scores(&self, query: &EmbeddingVector) -> Result<Vec<f64>, IndexError> {
        if query.dim() != self.dim {
            return Err(IndexError::DimensionMismatch { expected: self.dim, actual: query.dim() });
        }
        Ok(self.matrix.chunks(self.dim).map(|row| dot(row, query.as_slice())).collect())
    }

    /// Top `min(k, N)` rows by dot product, ties broken by ascending id.
    pub fn search(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<SearchHit>, IndexError> {
        if k == 0 {
            return Err(IndexError::InvalidK);
        }
        let hits = self
            .scores(query)?
            .into_iter()
            .enumerate()
            .map(|(row, score)| SearchHit { row, id: self.ids[row].clone(), score })
            .collect();
        Ok(rank_hits(hits, k))
    }
}
