//! Okapi BM25 over an inverted index.
//!
//! ```text
//! score(d, q) = sum_t IDF(t) * tf(t,d) * (k1 + 1) / (tf(t,d) + k1 * (1 - b + b * |d| / avgdl))
//! IDF(t)      = ln((N - df(t) + 0.5) / (df(t) + 0.5) + 1)
//! ```
//!
//! Repeated query terms contribute once per occurrence.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{rank_hits, IndexError, SearchHit};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.5, b: 0.75 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseIndex {
    pub(crate) params: Bm25Params,
    pub(crate) ids: Vec<String>,
    pub(crate) doc_lengths: Vec<u32>,
    pub(crate) avgdl: f64,
    /// term -> (doc row, term frequency), rows ascending.
    pub(crate) postings: BTreeMap<String, Vec<(u32, u32)>>,
}

impl SparseIndex {
    pub fn build(ids: Vec<String>, docs: &[Vec<String>], params: Bm25Params) -> Self {
        let mut postings: BTreeMap<String, Vec<(u32, u32)>> = BTreeMap::new();
        let mut doc_lengths = Vec::with_capacity(docs.len());
        for (row, doc) in docs.iter().enumerate() {
            doc_lengths.push(doc.len() as u32);
            let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
            for t in doc {
                *tf.entry(t.as_str()).or_insert(0) += 1;
            }
            for (term, count) in tf {
                postings.entry(term.to_string()).or_default().push((row as u32, count));
            }
        }
        Self::from_parts(params, ids, doc_lengths, postings)
    }

    pub(crate) fn from_parts(
        params: Bm25Params,
        ids: Vec<String>,
        doc_lengths: Vec<u32>,
        postings: BTreeMap<String, Vec<(u32, u32)>>,
    ) -> Self {
        let avgdl = if doc_lengths.is_empty() {
            0.0
        } else {
            doc_lengths.iter().map(|&l| f64::from(l)).sum::<f64>() / doc_lengths.len() as f64
        };
        SparseIndex { params, ids, doc_lengths, avgdl, postings }
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn doc_lengths(&self) -> &[u32] {
        &self.doc_lengths
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.ids.len() as f64;
        let df = self.document_frequency(term) as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    /// BM25 score of every document sharing at least one query term, keyed by row.
    pub fn scores(&self, query: &[String]) -> BTreeMap<usize, f64> {
        let Bm25Params { k1, b } = self.params;
        let mut out: BTreeMap<usize, f64> = BTreeMap::new();
        for term in query {
            let Some(list) = self.postings.get(term) else { continue };
            let idf = self.idf(term);
            for &(row, tf) in list {
                let tf = f64::from(tf);
                let dl = f64::from(self.doc_lengths[row as usize]);
                let s = idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * dl / self.avgdl));
                *out.entry(row as usize).or_insert(0.0) += s;
            }
        }
        out
    }

    /// Same as [`SparseIndex::scores`] but keyed by record id.
    pub fn scores_by_id(&self, query: &[String]) -> BTreeMap<String, f64> {
        self.scores(query).into_iter().map(|(row, s)| (self.ids[row].clone(), s)).collect()
    }

    pub fn search(&self, query: &[String], k: usize) -> Result<Vec<SearchHit>, IndexError> {
        if k == 0 {
            return Err(IndexError::InvalidK);
        }
        Ok(self.hits_from_scores(self.scores(query), k))
    }

    pub fn hits_from_scores(&self, scores: BTreeMap<usize, f64>, k: usize) -> Vec<SearchHit> {
        let hits = scores
            .into_iter()
            .map(|(row, score)| SearchHit { row, id: self.ids[row].clone(), score })
            .collect();
        rank_hits(hits, k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn index(docs: &[&str]) -> SparseIndex {
        let docs: Vec<Vec<String>> = docs.iter().map(|d| toks(d)).collect();
        let ids = (0..docs.len()).map(|i| format!("d{i}")).collect();
        SparseIndex::build(ids, &docs, Bm25Params::default())
    }

    #[test]
    fn absent_term_gives_empty_map() {
        assert!(index(&["a b c"]).scores(&toks("z")).is_empty());
        assert!(index(&["a b c"]).scores(&[]).is_empty());
    }

    #[test]
    fn one_document_closed_form() {
        // N = 1, df = 1: IDF = ln(0.5/1.5 + 1) = ln(4/3). |d| = avgdl, so the
        // length factor is 1 and each distinct term with tf = 1 scores
        // IDF * 2.5 / 2.5 = IDF.
        let idx = index(&["x y z"]);
        let s = idx.scores(&toks("x y z"));
        let expected = 3.0 * (4.0f64 / 3.0).ln();
        assert!((s[&0] - expected).abs() < 1e-12);
        assert!((idx.avgdl() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn k_zero_rejected() {
        assert!(matches!(index(&["a"]).search(&toks("a"), 0), Err(IndexError::InvalidK)));
    }

    #[test]
    fn idf_never_negative() {
        let idx = index(&["a", "a", "a b"]);
        assert!(idx.idf("a") > 0.0);
        assert!(idx.idf("b") > idx.idf("a"));
    }
}
