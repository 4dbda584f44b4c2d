//! Corpus chrF (character n-grams 1-6, beta = 2), whitespace included after
//! collapsing runs to single spaces.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub const CHAR_ORDER: usize = 6;
pub const BETA: f64 = 2.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChrfStats {
    pub matches: [u64; CHAR_ORDER],
    pub hyp_totals: [u64; CHAR_ORDER],
    pub ref_totals: [u64; CHAR_ORDER],
}

impl std::ops::AddAssign for ChrfStats {
    fn add_assign(&mut self, o: Self) {
        for n in 0..CHAR_ORDER {
            self.matches[n] += o.matches[n];
            self.hyp_totals[n] += o.hyp_totals[n];
            self.ref_totals[n] += o.ref_totals[n];
        }
    }
}

fn chars(text: &str) -> Vec<char> {
    text.split_whitespace().collect::<Vec<_>>().join(" ").chars().collect()
}

fn counts(chars: &[char], n: usize) -> HashMap<&[char], u64> {
    let mut m = HashMap::new();
    if chars.len() >= n {
        for w in chars.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

pub fn sentence_stats(hyp: &str, reference: &str) -> ChrfStats {
    let (h, r) = (chars(hyp), chars(reference));
    let mut s = ChrfStats::default();
    for n in 1..=CHAR_ORDER {
        let hc = counts(&h, n);
        let rc = counts(&r, n);
        s.hyp_totals[n - 1] = hc.values().sum();
        s.ref_totals[n - 1] = rc.values().sum();
        s.matches[n - 1] = hc.iter().map(|(g, &c)| c.min(rc.get(g).copied().unwrap_or(0))).sum();
    }
    s
}

/// F-beta of order-averaged character precision and recall, 0-100. Orders
/// where either side has no n-grams are skipped.
pub fn score(stats: &ChrfStats) -> f64 {
    let mut p = 0.0;
    let mut r = 0.0;
    let mut orders = 0usize;
    for n in 0..CHAR_ORDER {
        if stats.hyp_totals[n] == 0 || stats.ref_totals[n] == 0 {
            continue;
        }
        p += stats.matches[n] as f64 / stats.hyp_totals[n] as f64;
        r += stats.matches[n] as f64 / stats.ref_totals[n] as f64;
        orders += 1;
    }
    if orders == 0 {
        return 0.0;
    }
    p /= orders as f64;
    r /= orders as f64;
    let b2 = BETA * BETA;
    if p + r == 0.0 {
        return 0.0;
    }
    100.0 * (1.0 + b2) * p * r / (b2 * p + r)
}
