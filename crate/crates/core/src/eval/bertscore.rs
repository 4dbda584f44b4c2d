use crate::embedding::{EmbedError, EmbeddingProvider, TokenEmbeddings};

/// Greedy-alignment F1 between two token embedding sets (no IDF weighting,
/// no baseline rescaling).
pub fn f1_from_tokens(hyp: &TokenEmbeddings, reference: &TokenEmbeddings) -> f64 {
    if hyp.vectors.is_empty() || reference.vectors.is_empty() {
        return 0.0;
    }
    let sim: Vec<Vec<f64>> = hyp
        .vectors
        .iter()
        .map(|h| reference.vectors.iter().map(|r| h.dot(r)).collect())
        .collect();
    let precision = sim.iter().map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max)).sum::<f64>()
        / sim.len() as f64;
    let recall = (0..reference.vectors.len())
        .map(|j| sim.iter().map(|row| row[j]).fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / reference.vectors.len() as f64;
    if precision + recall <= 0.0 {
        return 0.0;
    }
    2.0 * precision * recall / (precision + recall)
}

pub fn bertscore_f1(hyp: &str, reference: &str, provider: &dyn EmbeddingProvider) -> Result<f64, EmbedError> {
    let h = provider.embed_tokens(hyp)?;
    let r = provider.embed_tokens(reference)?;
    Ok(f1_from_tokens(&h, &r))
}
