//! Browser bindings for the demo page in `www/`.
//!
//! Every export takes and returns plain strings; results are JSON. The
//! `*_json` functions hold the logic and are what the native tests call.

use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

use dialect_rag::corpus::{
    ingest_reader, normalize_basic, normalize_full, tokenize, CorpusRecord, IngestOptions, SourceFormat,
};
use dialect_rag::embedding::HashedNgramEmbedder;
use dialect_rag::eval::{score_outputs, EvalPair, ReportMeta, SystemOutput};
use dialect_rag::index::HybridIndex;
use dialect_rag::retrieve::{DeepMode, Pipeline, RetrievalSettings, Retriever};

/// Embedding width used for BERTScore and the explorer index.
pub const DIM: usize = 256;

fn lines(text: &str) -> Vec<&str> {
    text.lines().map(str::trim_end).collect()
}

/// Scores line-aligned hypotheses against references. An empty hypothesis
/// line counts as a missing output.
pub fn score_json(hypotheses: &str, references: &str) -> Result<String, String> {
    let (hyps, refs) = (lines(hypotheses), lines(references));
    if hyps.len() != refs.len() {
        return Err(format!("{} hypothesis lines but {} reference lines", hyps.len(), refs.len()));
    }
    let pairs: Vec<EvalPair> = refs
        .iter()
        .enumerate()
        .map(|(i, r)| EvalPair { id: (i + 1).to_string(), input: String::new(), reference: r.to_string(), dialect: String::new() })
        .collect();
    let outputs: Vec<SystemOutput> = hyps
        .iter()
        .map(|h| if h.trim().is_empty() { SystemOutput::failed("empty") } else { SystemOutput::ok(*h) })
        .collect();
    let meta = ReportMeta {
        dialect: String::new(),
        model: "demo".into(),
        pipeline: "demo".into(),
        n: 0,
        template_version: String::new(),
        embedder: format!("hashed-{DIM}"),
    };
    let report = score_outputs(&pairs, &outputs, &HashedNgramEmbedder::new(DIM), meta).map_err(|e| e.to_string())?;
    let sentences: Vec<_> = report
        .sentences
        .iter()
        .map(|s| json!({"line": s.index + 1, "wer": s.wer, "ref_words": s.ref_wc, "bertscore_f1": s.bert_f1}))
        .collect();
    Ok(json!({
        "bleu": report.bleu,
        "chrf": report.chrf,
        "wer": report.wer,
        "bertscore_f1": report.bertscore_f1,
        "sentences": sentences,
    })
    .to_string())
}

/// Both normalization levels, the tokens, and the tagged record a pair
/// would produce at ingestion.
pub fn normalize_json(local: &str, standard: &str, district: &str) -> String {
    let rec = CorpusRecord::pair("demo", district, local, standard);
    json!({
        "basic": normalize_basic(local),
        "full": normalize_full(local),
        "tokens": tokenize(&normalize_full(local)),
        "district": rec.district,
        "tags": rec.tags,
        "tagged": rec.local_norm_tagged,
        "standard": rec.standard_norm,
        "structured": rec.structured,
        "word_count": rec.word_count,
        "complexity": rec.complexity,
    })
    .to_string()
}

#[derive(Serialize)]
struct Row<'a> {
    rank: usize,
    id: &'a str,
    district: &'a str,
    standard: &'a str,
    local: &'a str,
    dense: f64,
    sparse: f64,
    bonus: f64,
    score: f64,
}

/// An in-memory hybrid index over a pasted pair corpus.
#[wasm_bindgen]
pub struct Explorer {
    index: HybridIndex,
    embedder: HashedNgramEmbedder,
}

impl Explorer {
    /// Builds from JSON Lines `{id, district, local, standard}`.
    pub fn build(corpus_jsonl: &str) -> Result<Explorer, String> {
        let opts = IngestOptions { lenient: true, csv: false };
        let (records, _) =
            ingest_reader(corpus_jsonl.as_bytes(), SourceFormat::Pairs, opts).map_err(|e| e.to_string())?;
        if records.is_empty() {
            return Err("corpus has no usable pairs".into());
        }
        let embedder = HashedNgramEmbedder::new(DIM);
        let index = HybridIndex::build(records, &embedder).map_err(|e| e.to_string())?;
        Ok(Explorer { index, embedder })
    }

    /// Runs one retrieval. `weights` overrides the (dense, sparse) weights of
    /// whichever fusion setting the query uses; candidate counts are kept.
    pub fn search_json(
        &self,
        query: &str,
        dialect: &str,
        pipeline: u8,
        k: usize,
        deep: &str,
        weights: Option<(f64, f64)>,
    ) -> Result<String, String> {
        let pipeline = match pipeline {
            1 => Pipeline::P1,
            2 => Pipeline::P2,
            other => return Err(format!("pipeline must be 1 or 2, got {other}")),
        };
        let deep: DeepMode = deep.parse()?;
        let mut settings = RetrievalSettings::default();
        if let Some((d, s)) = weights {
            for cfg in [&mut settings.p1, &mut settings.p2_standard, &mut settings.p2_short] {
                (cfg.w_dense, cfg.w_sparse) = (d, s);
            }
            settings.deep_weights = (d, s);
        }
        let retrieval = Retriever::new(&self.index, &self.embedder)
            .with_settings(settings)
            .retrieve(pipeline, query, dialect, k, deep)
            .map_err(|e| e.to_string())?;
        let rows: Vec<Row> = retrieval
            .candidates
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let r = &self.index.records[c.row];
                Row {
                    rank: i + 1,
                    id: &r.id,
                    district: &r.district,
                    standard: &r.standard_norm,
                    local: &r.text_norm,
                    dense: c.dense_norm,
                    sparse: c.sparse_norm,
                    bonus: c.bonuses.total(),
                    score: c.blended,
                }
            })
            .collect();
        let e = &retrieval.explain;
        Ok(json!({
            "candidates": rows,
            "query_text": e.query_text,
            "query_class": e.query_class,
            "weights": [e.w_dense, e.w_sparse],
            "k": [e.k_dense, e.k_sparse],
            "deep_search": e.deep_search,
        })
        .to_string())
    }

    pub fn dialect_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.index.records.iter().map(|r| r.district.clone()).collect();
        names.sort();
        names.dedup();
        names
    }
}

#[wasm_bindgen]
impl Explorer {
    #[wasm_bindgen(constructor)]
    pub fn new(corpus_jsonl: &str) -> Result<Explorer, JsError> {
        Explorer::build(corpus_jsonl).map_err(|e| JsError::new(&e))
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.len() == 0
    }

    /// Dialect names, newline separated.
    pub fn dialects(&self) -> String {
        self.dialect_names().join("\n")
    }

    /// Pass NaN weights to keep the built-in ones.
    #[allow(clippy::too_many_arguments)]
    pub fn search(
        &self,
        query: &str,
        dialect: &str,
        pipeline: u8,
        k: usize,
        deep: &str,
        w_dense: f64,
        w_sparse: f64,
    ) -> Result<String, JsError> {
        let weights = (!w_dense.is_nan() && !w_sparse.is_nan()).then_some((w_dense, w_sparse));
        self.search_json(query, dialect, pipeline, k, deep, weights).map_err(|e| JsError::new(&e))
    }
}

#[wasm_bindgen]
pub fn score(hypotheses: &str, references: &str) -> Result<String, JsError> {
    score_json(hypotheses, references).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn normalize(local: &str, standard: &str, district: &str) -> String {
    normalize_json(local, standard, district)
}
