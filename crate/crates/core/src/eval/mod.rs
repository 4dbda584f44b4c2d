//! Corpus-level translation metrics.
//!
//! BLEU and chrF sum per-sentence counts before scoring. WER is weighted by
//! reference word count. BERTScore F1 is the plain mean of sentence values.

mod bertscore;
mod bleu;
mod chrf;
mod report;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::tokenize;
use crate::distance::levenshtein;
use crate::embedding::{EmbedError, EmbeddingProvider};

pub use bertscore::{bertscore_f1, f1_from_tokens};
pub use bleu::{sentence_stats as bleu_sentence_stats, score as bleu_from_stats, BleuStats, MAX_ORDER};
pub use chrf::{sentence_stats as chrf_sentence_stats, score as chrf_from_stats, ChrfStats, BETA, CHAR_ORDER};
pub use report::{
    evaluate_run, heatmap_csv, read_eval_pairs, reports_csv, score_outputs, EvalPair, HeatmapMetric, MetricReport,
    ReportMeta, SentenceScore, SystemOutput, TranslationSystem,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{hyps} hypotheses for {refs} references")]
    LengthMismatch { hyps: usize, refs: usize },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("empty reference")]
    EmptyReference,
    #[error("every translation failed ({0} items)")]
    AllFailed(usize),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("pairs file line {line}: {reason}")]
    Pairs { line: usize, reason: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

fn check_lengths<A, B>(hyps: &[A], refs: &[B]) -> Result<(), EvalError> {
    if hyps.len() != refs.len() {
        return Err(EvalError::LengthMismatch { hyps: hyps.len(), refs: refs.len() });
    }
    if hyps.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    Ok(())
}

/// Corpus BLEU (0-100) over word tokens.
pub fn corpus_bleu<S: AsRef<str>, R: AsRef<str>>(hyps: &[S], refs: &[R]) -> Result<f64, EvalError> {
    check_lengths(hyps, refs)?;
    let mut total = BleuStats::default();
    for (h, r) in hyps.iter().zip(refs) {
        total += bleu::sentence_stats(&tokenize(h.as_ref()), &tokenize(r.as_ref()));
    }
    Ok(bleu::score(&total))
}

/// Corpus chrF (0-100).
pub fn corpus_chrf<S: AsRef<str>, R: AsRef<str>>(hyps: &[S], refs: &[R]) -> Result<f64, EvalError> {
    check_lengths(hyps, refs)?;
    let mut total = ChrfStats::default();
    for (h, r) in hyps.iter().zip(refs) {
        total += chrf::sentence_stats(h.as_ref(), r.as_ref());
    }
    Ok(chrf::score(&total))
}

/// Token edit distance divided by reference length; may exceed 1.
pub fn sentence_wer<S: AsRef<str> + PartialEq>(hyp: &[S], reference: &[S]) -> Result<f64, EvalError> {
    if reference.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    Ok(levenshtein(hyp, reference) as f64 / reference.len() as f64)
}

/// `sum(wer_i * refwc_i) / sum(refwc_i)` over (wer, reference word count) pairs.
pub fn corpus_wer(scores: &[(f64, usize)]) -> Result<f64, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let weighted: f64 = scores.iter().map(|&(w, n)| w * n as f64).sum();
    let total: usize = scores.iter().map(|&(_, n)| n).sum();
    if total == 0 {
        return Err(EvalError::EmptyReference);
    }
    Ok(weighted / total as f64)
}

/// Arithmetic mean of sentence F1 values.
pub fn corpus_bertscore(per_sentence: &[f64]) -> Result<f64, EvalError> {
    if per_sentence.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    Ok(per_sentence.iter().sum::<f64>() / per_sentence.len() as f64)
}

/// Corpus-level scores for one hypothesis list, all four metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusScores {
    pub bleu: f64,
    pub chrf: f64,
    pub wer: f64,
    pub bertscore_f1: f64,
}

pub fn corpus_scores<S: AsRef<str>, R: AsRef<str>>(
    hyps: &[S],
    refs: &[R],
    provider: &dyn EmbeddingProvider,
) -> Result<CorpusScores, EvalError> {
    check_lengths(hyps, refs)?;
    let mut wers = Vec::with_capacity(hyps.len());
    let mut f1 = Vec::with_capacity(hyps.len());
    for (h, r) in hyps.iter().zip(refs) {
        let (ht, rt) = (tokenize(h.as_ref()), tokenize(r.as_ref()));
        wers.push((sentence_wer(&ht, &rt)?, rt.len()));
        f1.push(if ht.is_empty() { 0.0 } else { bertscore_f1(h.as_ref(), r.as_ref(), provider)? });
    }
    Ok(CorpusScores {
        bleu: corpus_bleu(hyps, refs)?,
        chrf: corpus_chrf(hyps, refs)?,
        wer: corpus_wer(&wers)?,
        bertscore_f1: corpus_bertscore(&f1)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::HashedNgramEmbedder;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn bleu_edges() {
        let refs = ["ami bhat khai roj sokale", "tumi kothay jao"];
        assert!((corpus_bleu(&refs, &refs).unwrap() - 100.0).abs() < 1e-9);
        assert_eq!(corpus_bleu(&["x y z"], &["a b c"]).unwrap(), 0.0);
        assert!(matches!(corpus_bleu(&["a"], &["a", "b"]), Err(EvalError::LengthMismatch { .. })));
        assert!(matches!(corpus_bleu::<&str, &str>(&[], &[]), Err(EvalError::EmptyCorpus)));
    }

    #[test]
    fn chrf_edges() {
        let refs = ["ami bhat khai", "tumi"];
        assert!((corpus_chrf(&refs, &refs).unwrap() - 100.0).abs() < 1e-9);
        assert_eq!(corpus_chrf(&["xyz"], &["abc"]).unwrap(), 0.0);
    }

    #[test]
    fn wer_examples() {
        assert_eq!(sentence_wer(&toks("a b c"), &toks("a b c")).unwrap(), 0.0);
        assert_eq!(sentence_wer(&toks("a x c"), &toks("a b c")).unwrap(), 1.0 / 3.0);
        assert_eq!(sentence_wer(&toks("a b c"), &toks("a")).unwrap(), 2.0);
        assert!(matches!(sentence_wer(&toks("a"), &toks("")), Err(EvalError::EmptyReference)));
    }

    #[test]
    fn corpus_wer_weighting() {
        assert_eq!(corpus_wer(&[(0.5, 2), (0.0, 4)]).unwrap(), 1.0 / 6.0);
        assert_eq!(corpus_wer(&[(0.0, 3), (0.0, 1)]).unwrap(), 0.0);
        assert_eq!(corpus_wer(&[(0.75, 4)]).unwrap(), 0.75);
        assert!(matches!(corpus_wer(&[]), Err(EvalError::EmptyCorpus)));
    }

    #[test]
    fn bertscore_mean() {
        assert_eq!(corpus_bertscore(&[0.4, 0.6]).unwrap(), 0.5);
        assert!((corpus_bertscore(&[0.7, 0.7, 0.7]).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(corpus_bertscore(&[0.3]).unwrap(), 0.3);
    }

    #[test]
    fn bertscore_self_and_disjoint() {
        let e = HashedNgramEmbedder::new(768);
        assert!((bertscore_f1("ami bhat khai", "ami bhat khai", &e).unwrap() - 1.0).abs() < 1e-6);
        assert!(bertscore_f1("abcdef", "uvwxyz", &e).unwrap().abs() < 1e-6);
    }

    #[test]
    fn bertscore_hand_matrix() {
        use crate::embedding::{EmbeddingVector, TokenEmbeddings};
        // hyp h1=(1,0), h2=(0.6,0.8); ref r1=(0.8,0.6), r2=(0,1)
        // cos: h1.r1=0.8 h1.r2=0 h2.r1=0.96 h2.r2=0.8
        // P = (0.8 + 0.96)/2 = 0.88, R = (0.96 + 0.8)/2 = 0.88, F1 = 0.88
        let v = |a: f32, b: f32| EmbeddingVector::from_unit(vec![a, b]).unwrap();
        let h = TokenEmbeddings { tokens: vec!["h1".into(), "h2".into()], vectors: vec![v(1.0, 0.0), v(0.6, 0.8)] };
        let r = TokenEmbeddings { tokens: vec!["r1".into(), "r2".into()], vectors: vec![v(0.8, 0.6), v(0.0, 1.0)] };
        assert!((f1_from_tokens(&h, &r) - 0.88).abs() < 1e-6);
    }

    #[test]
    fn corpus_bleu_differs_from_sentence_mean() {
        // sentence means give (100 + 0) / 2 = 50; summed counts give
        // 100 * (6/7)^(1/4) ~ 96.2 since only one unigram of seven misses.
        let hyps = ["a b c d e f", "x"];
        let refs = ["a b c d e f", "p"];
        let corpus = corpus_bleu(&hyps, &refs).unwrap();
        let mean = (corpus_bleu(&hyps[..1], &refs[..1]).unwrap() + corpus_bleu(&hyps[1..], &refs[1..]).unwrap()) / 2.0;
        assert!((corpus - mean).abs() > 40.0, "corpus {corpus} vs mean {mean}");
    }
}
