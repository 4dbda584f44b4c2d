//! Test support: slow, obviously-correct reference implementations and
//! seeded generators for random corpora.
//!
//! Nothing here depends on the main crate; the oracles work on plain
//! strings, token lists and vectors.

pub mod gen;
pub mod http;
pub mod metrics;
pub mod retrieval;

/// Token-level merge oracle input: (id, district, is_short).
pub type MergeItem = (String, String, bool);

/// Expected output ids of the short-run merge: scans left to right and
/// groups maximal runs of consecutive short items that share a district.
/// Runs of length one pass through unchanged; longer runs become one item
/// whose id joins the members with '+'.
pub fn merge_oracle(items: &[MergeItem]) -> Vec<String> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < items.len() {
        if !items[i].2 {
            out.push(items[i].0.clone());
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < items.len() && items[j].2 && items[j].1 == items[i].1 {
            j += 1;
        }
        let ids: Vec<&str> = items[i..j].iter().map(|x| x.0.as_str()).collect();
        out.push(ids.join("+"));
        i = j;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_scanner() {
        let it = |id: &str, d: &str, s: bool| (id.to_string(), d.to_string(), s);
        let items = vec![it("a", "X", true), it("b", "X", true), it("c", "Y", true), it("d", "Y", false), it("e", "Y", true)];
        assert_eq!(merge_oracle(&items), vec!["a+b", "c", "d", "e"]);
    }
}
