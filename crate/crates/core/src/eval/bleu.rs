//! Corpus BLEU from summed clipped n-gram counts (orders 1-4), no smoothing.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuStats {
    pub matches: [u64; MAX_ORDER],
    pub totals: [u64; MAX_ORDER],
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl std::ops::AddAssign for BleuStats {
    fn add_assign(&mut self, o: Self) {
        for n in 0..MAX_ORDER {
            self.matches[n] += o.matches[n];
            self.totals[n] += o.totals[n];
        }
        self.hyp_len += o.hyp_len;
        self.ref_len += o.ref_len;
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

pub fn sentence_stats(hyp: &[String], reference: &[String]) -> BleuStats {
    let mut s = BleuStats { hyp_len: hyp.len() as u64, ref_len: reference.len() as u64, ..Default::default() };
    for n in 1..=MAX_ORDER {
        let h = ngram_counts(hyp, n);
        let r = ngram_counts(reference, n);
        s.totals[n - 1] = h.values().sum();
        s.matches[n - 1] = h.iter().map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0))).sum();
    }
    s
}

/// Scores aggregated counts on a 0-100 scale.
///
/// Orders with no hypothesis n-grams at all are left out of the geometric
/// mean; an order that has n-grams but no matches gives 0.
pub fn score(stats: &BleuStats) -> f64 {
    if stats.totals[0] == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    let mut orders = 0usize;
    for n in 0..MAX_ORDER {
        if stats.totals[n] == 0 {
            continue;
        }
        if stats.matches[n] == 0 {
            return 0.0;
        }
        log_sum += (stats.matches[n] as f64 / stats.totals[n] as f64).ln();
        orders += 1;
    }
    let (c, r) = (stats.hyp_len as f64, stats.ref_len as f64);
    let bp = if c < r { (1.0 - r / c).exp() } else { 1.0 };
    100.0 * bp * (log_sum / orders as f64).exp()
}
