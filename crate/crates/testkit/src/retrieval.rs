//! Brute-force BM25 and hybrid fusion: every document scored, every list
//! sorted from scratch.

use std::collections::HashSet;

/// One corpus entry as the oracle sees it.
#[derive(Debug, Clone)]
pub struct Doc {
    pub id: String,
    pub district: String,
    pub standard: String,
    pub local: String,
    pub tokens: Vec<String>,
    pub vector: Vec<f32>,
}

/// Okapi BM25 for every document by direct counting. `None` means no query
/// term occurs in the document.
pub fn bm25_all(docs: &[Vec<String>], query: &[String], k1: f64, b: f64) -> Vec<Option<f64>> {
    let n = docs.len() as f64;
    let mut total_len = 0.0;
    for d in docs {
        total_len += d.len() as f64;
    }
    let avgdl = total_len / n;
    let mut out: Vec<Option<f64>> = vec![None; docs.len()];
    for term in query {
        let df = docs.iter().filter(|d| d.contains(term)).count() as f64;
        let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
        for (i, d) in docs.iter().enumerate() {
            let tf = d.iter().filter(|t| *t == term).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let dl = d.len() as f64;
            let s = idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * dl / avgdl));
            out[i] = Some(match out[i] {
                None => s,
                Some(x) => x + s,
            });
        }
    }
    out
}

/// Single-document closed form: N = 1, df = 1 and |d| = avgdl, so the
/// length normalization is exactly 1 and IDF is ln(4/3).
pub fn bm25_single_doc(tf: f64, k1: f64) -> f64 {
    let idf = (0.5f64 / 1.5 + 1.0).ln();
    idf * (tf * (k1 + 1.0)) / (tf + k1)
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] as f64 * b[i] as f64;
    }
    s
}

/// (doc index, score) sorted by score descending then id ascending, top k.
fn top_k(docs: &[Doc], scored: Vec<(usize, f64)>, k: usize) -> Vec<(usize, f64)> {
    let mut v = scored;
    v.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(docs[x.0].id.cmp(&docs[y.0].id)));
    v.truncate(k);
    v
}

fn scale(hits: &[(usize, f64)]) -> Vec<f64> {
    if hits.is_empty() {
        return Vec::new();
    }
    let lo = hits.iter().map(|h| h.1).fold(f64::INFINITY, f64::min);
    let hi = hits.iter().map(|h| h.1).fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return vec![if hi > 0.0 { 1.0 } else { 0.0 }; hits.len()];
    }
    hits.iter().map(|h| (h.1 - lo) / (hi - lo)).collect()
}

fn char_lev(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let c = if a[i - 1] == b[j - 1] { 0 } else { 1 };
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + c);
        }
    }
    d[a.len()][b.len()]
}

/// (district, exact, substring, char_sim) bonuses.
pub fn bonus_terms(doc: &Doc, query_norm: &str, dialect: &str) -> [f64; 4] {
    let s = doc.standard.as_str();
    let q = query_norm;
    let district = if doc.district == dialect { 0.15 } else { 0.0 };
    let is_exact = !q.is_empty() && s == q;
    let is_sub = !is_exact && !q.is_empty() && !s.is_empty() && (s.contains(q) || q.contains(s));
    let longest = q.chars().count().max(s.chars().count());
    let sim = if longest == 0 { 0.0 } else { 1.0 - char_lev(q, s) as f64 / longest as f64 };
    [district, if is_exact { 0.5 } else { 0.0 }, if is_sub { 0.2 } else { 0.0 }, 0.05 * sim]
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleHit {
    pub id: String,
    pub blended: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// All fused candidates, before the dialect filter.
    pub scored: Vec<OracleHit>,
    /// Top k after the dialect filter.
    pub ranked: Vec<OracleHit>,
    pub unique_before: usize,
    pub deep_fired: bool,
    pub weights: (f64, f64),
}

struct Fusion<'a> {
    docs: &'a [Doc],
    bonus: Option<(&'a str, &'a str)>,
}

impl Fusion<'_> {
    fn run(&self, dense: &[(usize, f64)], sparse: &[(usize, f64)], w: (f64, f64)) -> Vec<(usize, f64)> {
        let dn = scale(dense);
        let sn = scale(sparse);
        let mut members: Vec<usize> = dense.iter().chain(sparse).map(|h| h.0).collect();
        members.sort();
        members.dedup();
        let mut out = Vec::new();
        for m in members {
            let d = dense.iter().position(|h| h.0 == m).map_or(0.0, |p| dn[p]);
            let s = sparse.iter().position(|h| h.0 == m).map_or(0.0, |p| sn[p]);
            let b = match self.bonus {
                Some((q, dialect)) => bonus_terms(&self.docs[m], q, dialect),
                None => [0.0; 4],
            };
            out.push((m, w.0 * d + w.1 * s + (b[0] + b[1] + b[2] + b[3])));
        }
        top_k(self.docs, out, usize::MAX)
    }
}

fn finish(docs: &[Doc], scored: &[(usize, f64)], dialect: &str, k: usize) -> (Vec<OracleHit>, Vec<OracleHit>) {
    let hit = |&(i, s): &(usize, f64)| OracleHit { id: docs[i].id.clone(), blended: s };
    let all = scored.iter().map(hit).collect();
    let ranked = scored.iter().filter(|(i, _)| docs[*i].district == dialect).take(k).map(hit).collect();
    (all, ranked)
}

fn dense_hits(docs: &[Doc], qv: &[f32], k: usize) -> Vec<(usize, f64)> {
    top_k(docs, docs.iter().enumerate().map(|(i, d)| (i, dot(&d.vector, qv))).collect(), k)
}

fn sparse_hits(docs: &[Doc], scores: Vec<Option<f64>>, k: usize) -> Vec<(usize, f64)> {
    top_k(docs, scores.into_iter().enumerate().filter_map(|(i, s)| s.map(|s| (i, s))).collect(), k)
}

/// Transcript pipeline: (0.70, 0.30), 50 + 50 candidates, no bonuses.
pub fn p1(docs: &[Doc], qv: &[f32], q_tokens: &[String], dialect: &str, k: usize) -> OracleResult {
    let token_lists: Vec<Vec<String>> = docs.iter().map(|d| d.tokens.clone()).collect();
    let dense = dense_hits(docs, qv, 50);
    let sparse = sparse_hits(docs, bm25_all(&token_lists, q_tokens, 1.5, 0.75), 50);
    let w = (0.70, 0.30);
    let scored = Fusion { docs, bonus: None }.run(&dense, &sparse, w);
    let (scored, ranked) = finish(docs, &scored, dialect, k);
    OracleResult { scored, ranked, unique_before: 0, deep_fired: false, weights: w }
}

/// Sentence-pair pipeline. `input_tokens` are the tokens of the normalized
/// query; `query_tokens` include the short-query tag when present; `qv` is
/// the embedding of the tagged query text. `deep` is Some(true/false) to
/// force, None for automatic.
#[allow(clippy::too_many_arguments)]
pub fn p2(
    docs: &[Doc],
    qv: &[f32],
    query_norm: &str,
    input_tokens: &[String],
    query_tokens: &[String],
    dialect: &str,
    k: usize,
    deep: Option<bool>,
) -> OracleResult {
    let token_lists: Vec<Vec<String>> = docs.iter().map(|d| d.tokens.clone()).collect();
    let short = input_tokens.len() < 4;
    let (mut w, kd, ks) = if short { ((0.35, 0.55), 100, 200) } else { ((0.55, 0.35), 50, 50) };
    let dense = dense_hits(docs, qv, kd);
    let sparse = sparse_hits(docs, bm25_all(&token_lists, query_tokens, 1.5, 0.75), ks);
    let fusion = Fusion { docs, bonus: Some((query_norm, dialect)) };
    let mut scored = fusion.run(&dense, &sparse, w);

    let distinct: HashSet<(&str, &str)> = scored
        .iter()
        .filter(|(i, _)| docs[*i].district == dialect)
        .map(|(i, _)| (docs[*i].standard.as_str(), docs[*i].local.as_str()))
        .collect();
    let unique_before = distinct.len();
    let fired = deep.unwrap_or(unique_before < 2);
    if fired {
        let mut summed: Vec<Option<f64>> = vec![None; docs.len()];
        for t in input_tokens {
            for (i, s) in bm25_all(&token_lists, std::slice::from_ref(t), 1.5, 0.75).into_iter().enumerate() {
                if let Some(s) = s {
                    summed[i] = Some(summed[i].map_or(s, |x| x + s));
                }
            }
        }
        w = (0.35, 0.55);
        scored = fusion.run(&dense, &sparse_hits(docs, summed, ks), w);
    }
    let (scored, ranked) = finish(docs, &scored, dialect, k);
    OracleResult { scored, ranked, unique_before, deep_fired: fired, weights: w }
}
