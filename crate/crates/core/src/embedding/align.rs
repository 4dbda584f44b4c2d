//! Re-aligning subword vectors from a remote model onto local word tokens.

use super::{EmbedError, EmbeddingVector};

const SPECIAL: [&str; 8] = ["[CLS]", "[SEP]", "[PAD]", "<s>", "</s>", "<pad>", "[MASK]", "<mask>"];

fn clean_piece(piece: &str) -> &str {
    piece
        .strip_prefix("##")
        .or_else(|| piece.strip_prefix('▁'))
        .or_else(|| piece.strip_prefix('Ġ'))
        .unwrap_or(piece)
}

/// Mean-pools subword vectors per local word token and re-normalizes.
///
/// Subwords are assigned by matching their characters against the
/// concatenated words; if the pieces do not spell the words (unknown
/// tokens, byte-level pieces) the assignment falls back to splitting the
/// subword sequence proportionally.
pub fn pool_to_words(
    words: &[String],
    pieces: &[String],
    vectors: &[Vec<f32>],
) -> Result<Vec<EmbeddingVector>, EmbedError> {
    if pieces.len() != vectors.len() || vectors.is_empty() {
        return Err(EmbedError::TokenizationMismatch { tokens: pieces.len(), vectors: vectors.len() });
    }
    if words.is_empty() {
        return Err(EmbedError::EmptyInput);
    }
    let kept: Vec<usize> = (0..pieces.len()).filter(|&i| !SPECIAL.contains(&pieces[i].as_str())).collect();
    let kept = if kept.is_empty() { (0..pieces.len()).collect() } else { kept };

    let groups = match_by_chars(words, pieces, &kept).unwrap_or_else(|| proportional(words.len(), &kept));
    let dim = vectors[0].len();
    groups
        .iter()
        .map(|group| {
            let mut sum = vec![0.0f64; dim];
            for &i in group {
                if vectors[i].len() != dim {
                    return Err(EmbedError::DimensionMismatch { expected: dim, actual: vectors[i].len() });
                }
                for (s, &v) in sum.iter_mut().zip(&vectors[i]) {
                    *s += f64::from(v);
                }
            }
            Ok(EmbeddingVector::normalized(sum))
        })
        .collect()
}

fn match_by_chars(words: &[String], pieces: &[String], kept: &[usize]) -> Option<Vec<Vec<usize>>> {
    let mut groups = vec![Vec::new(); words.len()];
    let mut word = 0usize;
    let mut consumed = 0usize;
    for &i in kept {
        let piece = clean_piece(&pieces[i]);
        if piece.is_empty() {
            continue;
        }
        while word < words.len() && consumed == words[word].len() {
            word += 1;
            consumed = 0;
        }
        let target = words.get(word)?;
        if !target[consumed..].starts_with(piece) {
            return None;
        }
        consumed += piece.len();
        groups[word].push(i);
    }
    let complete = word == words.len() - 1 && consumed == words[word].len();
    (complete && groups.iter().all(|g| !g.is_empty())).then_some(groups)
}

fn proportional(n_words: usize, kept: &[usize]) -> Vec<Vec<usize>> {
    let m = kept.len();
    (0..n_words)
        .map(|j| {
            let lo = j * m / n_words;
            let hi = ((j + 1) * m / n_words).max(lo + 1);
            kept[lo..hi].to_vec()
        })
        .collect()
}
