//! Scoring whole evaluation runs and writing reports.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{bleu, chrf, corpus_bertscore, corpus_wer, sentence_wer, BleuStats, ChrfStats, EvalError};
use crate::corpus::{canonical_district, tokenize};
use crate::embedding::EmbeddingProvider;

/// One test item: Standard Bengali input, dialect reference, dialect name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPair {
    #[serde(default, deserialize_with = "string_or_number")]
    pub id: String,
    #[serde(alias = "standard")]
    pub input: String,
    #[serde(alias = "local")]
    pub reference: String,
    #[serde(alias = "district")]
    pub dialect: String,
}

fn string_or_number<'de, D: serde::Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    match serde_json::Value::deserialize(d)? {
        serde_json::Value::String(s) => Ok(s),
        serde_json::Value::Number(n) => Ok(n.to_string()),
        serde_json::Value::Null => Ok(String::new()),
        other => Err(serde::de::Error::custom(format!("id must be a string or number, got {other}"))),
    }
}

/// Reads evaluation pairs from JSON Lines. Accepts either
/// `{input, reference, dialect}` or the corpus pair schema
/// `{id, district, local, standard}`.
pub fn read_eval_pairs(path: &Path) -> Result<Vec<EvalPair>, EvalError> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut pair: EvalPair =
            serde_json::from_str(line).map_err(|e| EvalError::Pairs { line: i + 1, reason: e.to_string() })?;
        if pair.id.is_empty() {
            pair.id = (i + 1).to_string();
        }
        pair.dialect = canonical_district(&pair.dialect);
        if tokenize(&pair.reference).is_empty() {
            return Err(EvalError::Pairs { line: i + 1, reason: "empty reference".into() });
        }
        out.push(pair);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemOutput {
    pub hypothesis: Option<String>,
    pub error: Option<String>,
}

impl SystemOutput {
    pub fn ok(text: impl Into<String>) -> Self {
        SystemOutput { hypothesis: Some(text.into()), error: None }
    }

    pub fn failed(error: impl Into<String>) -> Self {
        SystemOutput { hypothesis: None, error: Some(error.into()) }
    }
}

/// Anything that turns evaluation inputs into dialect outputs.
pub trait TranslationSystem {
    fn meta(&self) -> ReportMeta;
    /// One output per pair, same order.
    fn translate_all(&self, pairs: &[EvalPair]) -> Vec<SystemOutput>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub dialect: String,
    pub model: String,
    pub pipeline: String,
    pub n: usize,
    pub template_version: String,
    pub embedder: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceScore {
    pub index: usize,
    pub id: String,
    pub input: String,
    pub reference: String,
    pub hypothesis: Option<String>,
    pub error: Option<String>,
    pub bleu: BleuStats,
    pub chrf: ChrfStats,
    pub wer: f64,
    pub ref_wc: usize,
    pub bert_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub meta: ReportMeta,
    pub n_sentences: usize,
    pub n_missing: usize,
    pub bleu: f64,
    pub chrf: f64,
    /// Fraction; CSV output shows it as a percentage.
    pub wer: f64,
    pub bertscore_f1: f64,
    pub sentences: Vec<SentenceScore>,
}

impl MetricReport {
    /// Recomputes the corpus values from the per-sentence table.
    pub fn recompute(&self) -> (f64, f64, f64, f64) {
        let mut b = BleuStats::default();
        let mut c = ChrfStats::default();
        for s in &self.sentences {
            b += s.bleu;
            c += s.chrf;
        }
        let wers: Vec<(f64, usize)> = self.sentences.iter().map(|s| (s.wer, s.ref_wc)).collect();
        let f1: Vec<f64> = self.sentences.iter().map(|s| s.bert_f1).collect();
        (
            bleu::score(&b),
            chrf::score(&c),
            corpus_wer(&wers).unwrap_or(f64::NAN),
            corpus_bertscore(&f1).unwrap_or(f64::NAN),
        )
    }
}

/// Scores outputs against references. A missing output is scored as an
/// empty hypothesis: zero n-gram counts, WER 1.0, BERTScore 0.
pub fn score_outputs(
    pairs: &[EvalPair],
    outputs: &[SystemOutput],
    provider: &dyn EmbeddingProvider,
    meta: ReportMeta,
) -> Result<MetricReport, EvalError> {
    if pairs.len() != outputs.len() {
        return Err(EvalError::LengthMismatch { hyps: outputs.len(), refs: pairs.len() });
    }
    if pairs.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let mut sentences = Vec::with_capacity(pairs.len());
    for (index, (pair, out)) in pairs.iter().zip(outputs).enumerate() {
        let hyp = out.hypothesis.as_deref().unwrap_or("");
        let (ht, rt) = (tokenize(hyp), tokenize(&pair.reference));
        if rt.is_empty() {
            return Err(EvalError::EmptyReference);
        }
        let bert_f1 = if ht.is_empty() { 0.0 } else { super::bertscore_f1(hyp, &pair.reference, provider)? };
        sentences.push(SentenceScore {
            index,
            id: pair.id.clone(),
            input: pair.input.clone(),
            reference: pair.reference.clone(),
            hypothesis: out.hypothesis.clone(),
            error: out.error.clone(),
            bleu: bleu::sentence_stats(&ht, &rt),
            chrf: chrf::sentence_stats(hyp, &pair.reference),
            wer: sentence_wer(&ht, &rt)?,
            ref_wc: rt.len(),
            bert_f1,
        });
    }
    let mut report = MetricReport {
        meta,
        n_sentences: sentences.len(),
        n_missing: outputs.iter().filter(|o| o.hypothesis.is_none()).count(),
        bleu: 0.0,
        chrf: 0.0,
        wer: 0.0,
        bertscore_f1: 0.0,
        sentences,
    };
    (report.bleu, report.chrf, report.wer, report.bertscore_f1) = report.recompute();
    Ok(report)
}

/// Translates every pair and scores each dialect separately, dialects in
/// name order. Fails only if every translation failed.
pub fn evaluate_run(
    pairs: &[EvalPair],
    system: &dyn TranslationSystem,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<MetricReport>, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let outputs = system.translate_all(pairs);
    if outputs.iter().all(|o| o.hypothesis.is_none()) {
        return Err(EvalError::AllFailed(outputs.len()));
    }
    let mut groups: BTreeMap<&str, (Vec<EvalPair>, Vec<SystemOutput>)> = BTreeMap::new();
    for (p, o) in pairs.iter().zip(outputs) {
        let g = groups.entry(p.dialect.as_str()).or_default();
        g.0.push(p.clone());
        g.1.push(o);
    }
    let base = system.meta();
    groups
        .into_iter()
        .map(|(dialect, (ps, os))| {
            let meta = ReportMeta { dialect: dialect.to_string(), ..base.clone() };
            score_outputs(&ps, &os, provider, meta)
        })
        .collect()
}

/// `Dialect,Model,BLEU,ChrF,BERTScore F1,WER` with WER in percent.
pub fn reports_csv(reports: &[MetricReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["Dialect", "Model", "BLEU", "ChrF", "BERTScore F1", "WER"]).unwrap();
    for r in reports {
        w.write_record([
            r.meta.dialect.clone(),
            r.meta.model.clone(),
            format!("{:.2}", r.bleu),
            format!("{:.2}", r.chrf),
            format!("{:.4}", r.bertscore_f1),
            format!("{:.2}", r.wer * 100.0),
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeatmapMetric {
    Bleu,
    Chrf,
    Wer,
    Bertscore,
}

impl std::str::FromStr for HeatmapMetric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "bleu" => Ok(HeatmapMetric::Bleu),
            "chrf" => Ok(HeatmapMetric::Chrf),
            "wer" => Ok(HeatmapMetric::Wer),
            "bertscore" | "bert" => Ok(HeatmapMetric::Bertscore),
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}

/// Pipeline x dialect matrix of one metric, averaged over models. Empty
/// cells are left blank.
pub fn heatmap_csv(reports: &[MetricReport], metric: HeatmapMetric) -> String {
    let mut cells: BTreeMap<(&str, &str), (f64, usize)> = BTreeMap::new();
    let mut dialects: Vec<&str> = reports.iter().map(|r| r.meta.dialect.as_str()).collect();
    dialects.sort();
    dialects.dedup();
    let mut pipelines: Vec<&str> = reports.iter().map(|r| r.meta.pipeline.as_str()).collect();
    pipelines.sort();
    pipelines.dedup();
    for r in reports {
        let v = match metric {
            HeatmapMetric::Bleu => r.bleu,
            HeatmapMetric::Chrf => r.chrf,
            HeatmapMetric::Wer => r.wer * 100.0,
            HeatmapMetric::Bertscore => r.bertscore_f1,
        };
        let c = cells.entry((r.meta.pipeline.as_str(), r.meta.dialect.as_str())).or_insert((0.0, 0));
        c.0 += v;
        c.1 += 1;
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["Pipeline".to_string()];
    header.extend(dialects.iter().map(|d| d.to_string()));
    w.write_record(&header).unwrap();
    for p in &pipelines {
        let mut row = vec![p.to_string()];
        for d in &dialects {
            row.push(cells.get(&(*p, *d)).map(|(s, n)| format!("{:.4}", s / *n as f64)).unwrap_or_default());
        }
        w.write_record(&row).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::HashedNgramEmbedder;

    fn meta() -> ReportMeta {
        ReportMeta {
            dialect: "Sylhet".into(),
            model: "m".into(),
            pipeline: "p2".into(),
            n: 5,
            template_version: "t".into(),
            embedder: "e".into(),
        }
    }

    fn pair(i: &str, r: &str) -> EvalPair {
        EvalPair { id: String::new(), input: i.into(), reference: r.into(), dialect: "Sylhet".into() }
    }

    #[test]
    fn numeric_ids_are_read_as_strings() {
        let dir = std::env::temp_dir().join(format!("pairs-{}", std::process::id()));
        std::fs::write(&dir, "{\"id\": 7, \"standard\": \"a\", \"local\": \"b\", \"district\": \"sylhet\"}\n{\"input\": \"c\", \"reference\": \"d\", \"dialect\": \"Sylhet\"}\n").unwrap();
        let pairs = read_eval_pairs(&dir).unwrap();
        std::fs::remove_file(&dir).unwrap();
        assert_eq!(pairs[0].id, "7");
        assert_eq!(pairs[1].id, "2");
        assert_eq!(pairs[0].dialect, pairs[1].dialect);
    }

    #[test]
    fn perfect_outputs() {
        let pairs = vec![pair("a", "ami bari jaimu ekhon"), pair("b", "tumi kuno")];
        let outs: Vec<_> = pairs.iter().map(|p| SystemOutput::ok(p.reference.clone())).collect();
        let r = score_outputs(&pairs, &outs, &HashedNgramEmbedder::new(64), meta()).unwrap();
        assert!((r.bleu - 100.0).abs() < 1e-9);
        assert!((r.chrf - 100.0).abs() < 1e-9);
        assert_eq!(r.wer, 0.0);
        assert!((r.bertscore_f1 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn missing_scored_as_empty() {
        let pairs = vec![pair("a", "ami bari jaimu"), pair("b", "tumi kuno")];
        let outs = vec![SystemOutput::ok("ami bari jaimu"), SystemOutput::failed("timeout")];
        let r = score_outputs(&pairs, &outs, &HashedNgramEmbedder::new(64), meta()).unwrap();
        assert_eq!(r.n_missing, 1);
        assert_eq!(r.sentences[1].wer, 1.0);
        assert_eq!(r.sentences[1].bleu.totals, [0; 4]);
        assert_eq!(r.sentences[1].bert_f1, 0.0);
        assert!((r.wer - 2.0 / 5.0).abs() < 1e-12);
    }

    #[test]
    fn csv_layout() {
        let pairs = vec![pair("a", "ami")];
        let r = score_outputs(&pairs, &[SystemOutput::ok("ami")], &HashedNgramEmbedder::new(16), meta()).unwrap();
        let csv = reports_csv(std::slice::from_ref(&r));
        assert_eq!(csv.lines().next().unwrap(), "Dialect,Model,BLEU,ChrF,BERTScore F1,WER");
        assert_eq!(csv.lines().nth(1).unwrap(), "Sylhet,m,100.00,100.00,1.0000,0.00");
        let hm = heatmap_csv(&[r], HeatmapMetric::Wer);
        assert_eq!(hm, "Pipeline,Sylhet\np2,0.0000\n");
    }
}
