//! Hybrid retrieval strategies.
//!
//! Pipeline 1 fuses min-max normalized dense and BM25 channels with fixed
//! weights (0.70 / 0.30) and filters by dialect. Pipeline 2 switches weights
//! and candidate depth on query length, adds a BM25-per-token deep search
//! when the first pass finds fewer than two distinct examples, and ranks by
//! a blended score with district, exact, substring and character-similarity
//! bonuses.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{canonical_district, normalize_basic, normalize_full, tokenize, CorpusRecord, Tag};
use crate::distance::char_similarity;
use crate::embedding::{EmbedError, EmbeddingProvider};
use crate::index::{HybridIndex, IndexError, SearchHit, SparseIndex};

/// Queries with fewer tokens than this are treated as short.
pub const SHORT_QUERY_TOKENS: usize = 4;

#[derive(Debug, Error)]
pub enum RetrieveError {
    #[error("unknown dialect {0:?}: not present in the index")]
    UnknownDialect(String),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("k must be at least 1")]
    InvalidK,
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pipeline {
    #[serde(rename = "p1")]
    P1,
    #[serde(rename = "p2")]
    P2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryClass {
    Standard,
    Short,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeepMode {
    #[default]
    Auto,
    On,
    Off,
}

impl std::str::FromStr for DeepMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(DeepMode::Auto),
            "on" => Ok(DeepMode::On),
            "off" => Ok(DeepMode::Off),
            other => Err(format!("expected auto|on|off, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub w_dense: f64,
    pub w_sparse: f64,
    pub k_dense: usize,
    pub k_sparse: usize,
}

impl FusionConfig {
    pub const P1: FusionConfig = FusionConfig { w_dense: 0.70, w_sparse: 0.30, k_dense: 50, k_sparse: 50 };
    pub const P2_STANDARD: FusionConfig = FusionConfig { w_dense: 0.55, w_sparse: 0.35, k_dense: 50, k_sparse: 50 };
    pub const P2_SHORT: FusionConfig = FusionConfig { w_dense: 0.35, w_sparse: 0.55, k_dense: 100, k_sparse: 200 };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BonusConfig {
    pub district: f64,
    pub exact: f64,
    pub substring: f64,
    /// Multiplier on character-level similarity in [0, 1].
    pub char_sim: f64,
}

impl Default for BonusConfig {
    fn default() -> Self {
        BonusConfig { district: 0.15, exact: 0.50, substring: 0.20, char_sim: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalSettings {
    pub p1: FusionConfig,
    pub p2_standard: FusionConfig,
    pub p2_short: FusionConfig,
    /// (dense, sparse) weights once deep search replaces the sparse channel.
    pub deep_weights: (f64, f64),
    pub bonuses: BonusConfig,
    /// Auto deep search fires below this many distinct in-dialect examples.
    pub min_unique: usize,
}

impl Default for RetrievalSettings {
    fn default() -> Self {
        RetrievalSettings {
            p1: FusionConfig::P1,
            p2_standard: FusionConfig::P2_STANDARD,
            p2_short: FusionConfig::P2_SHORT,
            deep_weights: (0.35, 0.55),
            bonuses: BonusConfig::default(),
            min_unique: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Bonuses {
    pub district: f64,
    pub exact: f64,
    pub substring: f64,
    pub char_sim: f64,
}

impl Bonuses {
    pub fn total(&self) -> f64 {
        self.district + self.exact + self.substring + self.char_sim
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalCandidate {
    pub row: usize,
    pub id: String,
    pub district: String,
    pub dense_raw: Option<f64>,
    pub sparse_raw: Option<f64>,
    pub dense_norm: f64,
    pub sparse_norm: f64,
    pub bonuses: Bonuses,
    pub blended: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepSearchTrace {
    pub mode: DeepMode,
    /// Distinct in-dialect examples found by the first pass.
    pub unique_before: usize,
    pub fired: bool,
    pub tokens: Vec<String>,
}

/// Everything needed to audit one retrieval: the constants in force, the
/// query as seen by each channel, and every scored candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explain {
    pub pipeline: Pipeline,
    pub dialect: String,
    pub query_norm: String,
    pub query_text: String,
    pub query_tokens: Vec<String>,
    pub query_class: Option<QueryClass>,
    pub empty_query: bool,
    pub w_dense: f64,
    pub w_sparse: f64,
    pub k_dense: usize,
    pub k_sparse: usize,
    pub deep_search: Option<DeepSearchTrace>,
    /// All scored candidates before the dialect filter, in ranked order.
    pub scored: Vec<RetrievalCandidate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Retrieval {
    pub candidates: Vec<RetrievalCandidate>,
    pub explain: Explain,
}

/// Short iff fewer than four tokens.
pub fn classify_query(query_norm: &str) -> QueryClass {
    if tokenize(query_norm).len() < SHORT_QUERY_TOKENS {
        QueryClass::Short
    } else {
        QueryClass::Standard
    }
}

/// Min-max scaling to [0, 1]; a constant list maps to 1.0 if positive else 0.0.
pub fn min_max(values: &[f64]) -> Vec<f64> {
    let Some(max) = values.iter().copied().reduce(f64::max) else { return Vec::new() };
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if max == min {
        let v = if max > 0.0 { 1.0 } else { 0.0 };
        return vec![v; values.len()];
    }
    values.iter().map(|v| (v - min) / (max - min)).collect()
}

/// Per-token BM25 runs summed per document, tokens taken in order.
pub fn deep_search(tokens: &[String], sparse: &SparseIndex) -> BTreeMap<usize, f64> {
    let mut total: BTreeMap<usize, f64> = BTreeMap::new();
    for token in tokens {
        for (row, s) in sparse.scores(std::slice::from_ref(token)) {
            *total.entry(row).or_insert(0.0) += s;
        }
    }
    total
}

/// Bonus breakdown for one candidate against the normalized query.
pub fn bonuses(record: &CorpusRecord, query_norm: &str, dialect: &str, cfg: &BonusConfig) -> Bonuses {
    let standard = record.standard_norm.as_str();
    let exact = !query_norm.is_empty() && standard == query_norm;
    let substring = !exact
        && !query_norm.is_empty()
        && !standard.is_empty()
        && (standard.contains(query_norm) || query_norm.contains(standard));
    Bonuses {
        district: if record.district == dialect { cfg.district } else { 0.0 },
        exact: if exact { cfg.exact } else { 0.0 },
        substring: if substring { cfg.substring } else { 0.0 },
        char_sim: cfg.char_sim * char_similarity(query_norm, standard),
    }
}

/// `w_dense * dense + w_sparse * sparse + sum(bonuses)`.
pub fn blend_score(dense_norm: f64, sparse_norm: f64, weights: (f64, f64), bonuses: &Bonuses) -> f64 {
    weights.0 * dense_norm + weights.1 * sparse_norm + bonuses.total()
}

fn rank_candidates(cands: &mut [RetrievalCandidate]) {
    cands.sort_by(|a, b| b.blended.total_cmp(&a.blended).then_with(|| a.id.cmp(&b.id)));
}

pub struct Retriever<'a> {
    pub index: &'a HybridIndex,
    pub provider: &'a dyn EmbeddingProvider,
    pub settings: RetrievalSettings,
}

impl<'a> Retriever<'a> {
    pub fn new(index: &'a HybridIndex, provider: &'a dyn EmbeddingProvider) -> Self {
        Retriever { index, provider, settings: RetrievalSettings::default() }
    }

    pub fn with_settings(mut self, settings: RetrievalSettings) -> Self {
        self.settings = settings;
        self
    }

    fn check(&self, dialect: &str, k: usize) -> Result<String, RetrieveError> {
        if self.index.is_empty() {
            return Err(RetrieveError::EmptyCorpus);
        }
        if k == 0 {
            return Err(RetrieveError::InvalidK);
        }
        let dialect = canonical_district(dialect);
        if !self.index.has_district(&dialect) {
            return Err(RetrieveError::UnknownDialect(dialect));
        }
        Ok(dialect)
    }

    /// Union of both channels, each min-max normalized over its own hits.
    fn fuse(
        &self,
        dense: &[SearchHit],
        sparse: &[SearchHit],
        weights: (f64, f64),
        bonus: Option<(&str, &str)>,
    ) -> Vec<RetrievalCandidate> {
        let dense_norm = min_max(&dense.iter().map(|h| h.score).collect::<Vec<_>>());
        let sparse_norm = min_max(&sparse.iter().map(|h| h.score).collect::<Vec<_>>());
        let mut by_row: BTreeMap<usize, RetrievalCandidate> = BTreeMap::new();
        let blank = |row: usize| {
            let rec = &self.index.records[row];
            RetrievalCandidate {
                row,
                id: rec.id.clone(),
                district: rec.district.clone(),
                dense_raw: None,
                sparse_raw: None,
                dense_norm: 0.0,
                sparse_norm: 0.0,
                bonuses: Bonuses::default(),
                blended: 0.0,
            }
        };
        for (hit, norm) in dense.iter().zip(dense_norm) {
            let c = by_row.entry(hit.row).or_insert_with(|| blank(hit.row));
            c.dense_raw = Some(hit.score);
            c.dense_norm = norm;
        }
        for (hit, norm) in sparse.iter().zip(sparse_norm) {
            let c = by_row.entry(hit.row).or_insert_with(|| blank(hit.row));
            c.sparse_raw = Some(hit.score);
            c.sparse_norm = norm;
        }
        let mut out: Vec<RetrievalCandidate> = by_row.into_values().collect();
        for c in &mut out {
            if let Some((query_norm, dialect)) = bonus {
                c.bonuses = bonuses(&self.index.records[c.row], query_norm, dialect, &self.settings.bonuses);
            }
            c.blended = blend_score(c.dense_norm, c.sparse_norm, weights, &c.bonuses);
        }
        rank_candidates(&mut out);
        out
    }

    fn finish(scored: &[RetrievalCandidate], dialect: &str, k: usize) -> Vec<RetrievalCandidate> {
        scored.iter().filter(|c| c.district == dialect).take(k).cloned().collect()
    }

    /// Transcript pipeline: fixed-weight fusion, then dialect filter.
    pub fn retrieve_p1(&self, query: &str, dialect: &str, k: usize) -> Result<Retrieval, RetrieveError> {
        let dialect = self.check(dialect, k)?;
        let cfg = self.settings.p1;
        let query_norm = normalize_basic(query);
        let tokens = tokenize(&query_norm);
        let qv = self.provider.embed_one(&query_norm)?;
        let dense = self.index.dense.search(&qv, cfg.k_dense)?;
        let sparse = self.index.sparse.search(&tokens, cfg.k_sparse)?;
        let scored = self.fuse(&dense, &sparse, (cfg.w_dense, cfg.w_sparse), None);
        let candidates = Self::finish(&scored, &dialect, k);
        let explain = Explain {
            pipeline: Pipeline::P1,
            dialect,
            query_text: query_norm.clone(),
            query_norm,
            empty_query: tokens.is_empty(),
            query_tokens: tokens,
            query_class: None,
            w_dense: cfg.w_dense,
            w_sparse: cfg.w_sparse,
            k_dense: cfg.k_dense,
            k_sparse: cfg.k_sparse,
            deep_search: None,
            scored,
        };
        Ok(Retrieval { candidates, explain })
    }

    /// Sentence-pair pipeline with adaptive weighting, optional deep search
    /// and bonus-blended ranking.
    pub fn retrieve_p2(&self, query: &str, dialect: &str, k: usize, deep: DeepMode) -> Result<Retrieval, RetrieveError> {
        let dialect = self.check(dialect, k)?;
        let query_norm = normalize_full(query);
        let input_tokens = tokenize(&query_norm);
        let class = classify_query(&query_norm);
        if input_tokens.is_empty() {
            log::warn!("empty query after normalization");
        }
        let query_text = match class {
            QueryClass::Short if query_norm.is_empty() => Tag::Short.marker().to_string(),
            QueryClass::Short => format!("{query_norm} {}", Tag::Short.marker()),
            QueryClass::Standard => query_norm.clone(),
        };
        let query_tokens = tokenize(&query_text);
        let cfg = match class {
            QueryClass::Short => self.settings.p2_short,
            QueryClass::Standard => self.settings.p2_standard,
        };

        let qv = self.provider.embed_one(&query_text)?;
        let dense = self.index.dense.search(&qv, cfg.k_dense)?;
        let sparse = self.index.sparse.search(&query_tokens, cfg.k_sparse)?;
        let bonus = Some((query_norm.as_str(), dialect.as_str()));
        let mut weights = (cfg.w_dense, cfg.w_sparse);
        let mut scored = self.fuse(&dense, &sparse, weights, bonus);

        let unique_before = self.unique_examples(&scored, &dialect);
        let fired = match deep {
            DeepMode::On => true,
            DeepMode::Off => false,
            DeepMode::Auto => unique_before < self.settings.min_unique,
        };
        if fired {
            let deep_scores = deep_search(&input_tokens, &self.index.sparse);
            let deep_hits = self.index.sparse.hits_from_scores(deep_scores, cfg.k_sparse);
            weights = self.settings.deep_weights;
            scored = self.fuse(&dense, &deep_hits, weights, bonus);
        }

        let candidates = Self::finish(&scored, &dialect, k);
        let explain = Explain {
            pipeline: Pipeline::P2,
            dialect,
            query_norm,
            query_text,
            empty_query: input_tokens.is_empty(),
            query_tokens,
            query_class: Some(class),
            w_dense: weights.0,
            w_sparse: weights.1,
            k_dense: cfg.k_dense,
            k_sparse: cfg.k_sparse,
            deep_search: Some(DeepSearchTrace { mode: deep, unique_before, fired, tokens: input_tokens }),
            scored,
        };
        Ok(Retrieval { candidates, explain })
    }

    /// Distinct (standard, local) texts among in-dialect candidates.
    fn unique_examples(&self, scored: &[RetrievalCandidate], dialect: &str) -> usize {
        scored
            .iter()
            .filter(|c| c.district == dialect)
            .map(|c| {
                let r = &self.index.records[c.row];
                (r.standard_norm.as_str(), r.text_norm.as_str())
            })
            .collect::<BTreeSet<_>>()
            .len()
    }

    pub fn retrieve(&self, pipeline: Pipeline, query: &str, dialect: &str, k: usize, deep: DeepMode) -> Result<Retrieval, RetrieveError> {
        match pipeline {
            Pipeline::P1 => self.retrieve_p1(query, dialect, k),
            Pipeline::P2 => self.retrieve_p2(query, dialect, k, deep),
        }
    }
}
