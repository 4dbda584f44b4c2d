//! Metric oracles written from the textbook definitions, favoring
//! directness over speed.

use std::collections::HashMap;

fn ngrams<T: Clone>(seq: &[T], n: usize) -> Vec<Vec<T>> {
    if seq.len() < n {
        return Vec::new();
    }
    (0..=seq.len() - n).map(|i| seq[i..i + n].to_vec()).collect()
}

fn count<T: PartialEq>(list: &[Vec<T>], item: &[T]) -> u64 {
    list.iter().filter(|g| g.as_slice() == item).count() as u64
}

/// (clipped matches, hypothesis n-gram total) for one order.
fn clipped<T: Clone + PartialEq>(hyp: &[T], reference: &[T], n: usize) -> (u64, u64) {
    let h = ngrams(hyp, n);
    let r = ngrams(reference, n);
    let mut seen: Vec<Vec<T>> = Vec::new();
    let mut matches = 0;
    for g in &h {
        if seen.contains(g) {
            continue;
        }
        seen.push(g.clone());
        matches += count(&h, g).min(count(&r, g));
    }
    (matches, h.len() as u64)
}

/// Corpus BLEU over pre-tokenized sentences, 0-100. Orders without any
/// hypothesis n-grams are skipped; an order with n-grams but no match gives 0.
pub fn bleu(hyps: &[Vec<String>], refs: &[Vec<String>]) -> f64 {
    let mut m = [0u64; 4];
    let mut t = [0u64; 4];
    let (mut c, mut r) = (0usize, 0usize);
    for (h, rf) in hyps.iter().zip(refs) {
        c += h.len();
        r += rf.len();
        for n in 1..=4 {
            let (a, b) = clipped(h, rf, n);
            m[n - 1] += a;
            t[n - 1] += b;
        }
    }
    if t[0] == 0 {
        return 0.0;
    }
    let mut product = 1.0f64;
    let mut k = 0;
    for n in 0..4 {
        if t[n] == 0 {
            continue;
        }
        if m[n] == 0 {
            return 0.0;
        }
        product *= m[n] as f64 / t[n] as f64;
        k += 1;
    }
    let bp = if c >= r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    100.0 * bp * product.powf(1.0 / k as f64)
}

fn squeeze(text: &str) -> Vec<char> {
    let mut out = Vec::new();
    for (i, w) in text.split_whitespace().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.extend(w.chars());
    }
    out
}

/// Corpus chrF (orders 1-6, beta 2), 0-100.
pub fn chrf(hyps: &[String], refs: &[String]) -> f64 {
    let mut m = [0u64; 6];
    let mut th = [0u64; 6];
    let mut tr = [0u64; 6];
    for (h, r) in hyps.iter().zip(refs) {
        let (h, r) = (squeeze(h), squeeze(r));
        for n in 1..=6 {
            let (a, b) = clipped(&h, &r, n);
            m[n - 1] += a;
            th[n - 1] += b;
            tr[n - 1] += ngrams(&r, n).len() as u64;
        }
    }
    let (mut p, mut rc, mut k) = (0.0, 0.0, 0);
    for n in 0..6 {
        if th[n] > 0 && tr[n] > 0 {
            p += m[n] as f64 / th[n] as f64;
            rc += m[n] as f64 / tr[n] as f64;
            k += 1;
        }
    }
    if k == 0 {
        return 0.0;
    }
    let (p, rc) = (p / k as f64, rc / k as f64);
    if p + rc == 0.0 {
        return 0.0;
    }
    100.0 * 5.0 * p * rc / (4.0 * p + rc)
}

/// Edit distance by memoized recursion on suffixes.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    fn go<T: PartialEq>(a: &[T], b: &[T], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == a.len() {
            return b.len() - j;
        }
        if j == b.len() {
            return a.len() - i;
        }
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let v = if a[i] == b[j] {
            go(a, b, i + 1, j + 1, memo)
        } else {
            1 + go(a, b, i + 1, j, memo).min(go(a, b, i, j + 1, memo)).min(go(a, b, i + 1, j + 1, memo))
        };
        memo.insert((i, j), v);
        v
    }
    go(a, b, 0, 0, &mut HashMap::new())
}

pub fn sentence_wer(hyp: &[String], reference: &[String]) -> f64 {
    edit_distance(hyp, reference) as f64 / reference.len() as f64
}

/// Total edits over total reference words.
pub fn corpus_wer(hyps: &[Vec<String>], refs: &[Vec<String>]) -> f64 {
    let edits: usize = hyps.iter().zip(refs).map(|(h, r)| edit_distance(h, r)).sum();
    let words: usize = refs.iter().map(Vec::len).sum();
    edits as f64 / words as f64
}

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum();
    let na: f64 = a.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Greedy soft-alignment F1 from raw token vectors.
pub fn bertscore_f1(hyp: &[Vec<f32>], reference: &[Vec<f32>]) -> f64 {
    if hyp.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let best = |x: &Vec<f32>, others: &[Vec<f32>]| others.iter().map(|y| cosine(x, y)).fold(f64::MIN, f64::max);
    let p = hyp.iter().map(|h| best(h, reference)).sum::<f64>() / hyp.len() as f64;
    let r = reference.iter().map(|x| best(x, hyp)).sum::<f64>() / reference.len() as f64;
    if p + r <= 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}
