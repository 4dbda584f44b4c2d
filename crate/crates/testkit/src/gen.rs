//! Seeded random inputs.

use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};

pub use rand;

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Small mixed Latin/Bengali vocabulary; small on purpose so that random
/// sentences share n-grams and produce ties.
pub const VOCAB: [&str; 24] = [
    "ami", "tumi", "bari", "jabo", "jaimu", "khai", "bhat", "kita", "kene", "ase", "nai", "ekhon",
    "আমি", "তুমি", "বাড়ি", "যাব", "ভাত", "খাই", "কেন", "আছে", "না", "এখন", "কী", "হয়",
];

pub const DISTRICTS: [&str; 4] = ["Chittagong", "Sylhet", "Rangpur", "Barishal"];

pub fn words(rng: &mut impl Rng, lo: usize, hi: usize) -> Vec<String> {
    let n = rng.random_range(lo..=hi);
    (0..n).map(|_| VOCAB.choose(rng).unwrap().to_string()).collect()
}

pub fn sentence(rng: &mut impl Rng, lo: usize, hi: usize) -> String {
    let mut s = words(rng, lo, hi).join(" ");
    if !s.is_empty() && rng.random_bool(0.15) {
        s.push('?');
    }
    s
}

/// A perturbed copy of `base`: random deletions, substitutions and inserts.
pub fn perturb(rng: &mut impl Rng, base: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    for w in base {
        match rng.random_range(0..10) {
            0 => {}
            1 => out.push(VOCAB.choose(rng).unwrap().to_string()),
            2 => {
                out.push(w.clone());
                out.push(VOCAB.choose(rng).unwrap().to_string());
            }
            _ => out.push(w.clone()),
        }
    }
    out
}

/// One generated pair row: (id, district, local, standard).
pub type PairRow = (String, String, String, String);

/// Random pair corpus. Ids are shuffled relative to row order, and some
/// rows duplicate earlier texts so tie-breaking gets exercised.
pub fn pair_corpus(rng: &mut impl Rng, n: usize, districts: &[&str]) -> Vec<PairRow> {
    let mut ids: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(ids.as_mut_slice(), rng);
    let mut rows: Vec<PairRow> = Vec::with_capacity(n);
    for (i, id) in ids.into_iter().enumerate() {
        let district = districts.choose(rng).unwrap().to_string();
        let (local, standard) = if i > 0 && rng.random_bool(0.1) {
            let j = rng.random_range(0..i);
            (rows[j].2.clone(), rows[j].3.clone())
        } else {
            (sentence(rng, 1, 8), sentence(rng, 1, 8))
        };
        rows.push((format!("r{id:04}"), district, local, standard));
    }
    rows
}

/// Random Unicode string biased toward characters that normalization
/// touches: Bengali letters and signs, digits, zero-width marks, quote and
/// dash variants, pipes, whitespace and repeated characters.
pub fn messy_string(rng: &mut impl Rng) -> String {
    const SPECIAL: [char; 28] = [
        '\u{200B}', '\u{200C}', '\u{200D}', '\u{FEFF}', '\u{201C}', '\u{201D}', '\u{2018}', '\u{2019}', '\u{2013}',
        '\u{2014}', '|', '।', '?', '!', ' ', '\t', '\n', '\u{00A0}', '\u{09BC}', '\u{09C7}', '\u{09BE}', '\u{09D7}',
        '\u{09A1}', '\u{09AF}', 'e', '\u{0301}', 'A', '\u{0963}',
    ];
    let len = rng.random_range(0..40);
    let mut s = String::new();
    while s.chars().count() < len {
        let c = match rng.random_range(0..5) {
            0 => *SPECIAL.choose(rng).unwrap(),
            1 => char::from_u32(rng.random_range(0x0980..0x0A00)).unwrap_or('ক'),
            2 => char::from_u32(rng.random_range(0x09E6..0x09F0)).unwrap(),
            3 => char::from_u32(rng.random_range(0x20..0x7F)).unwrap(),
            _ => loop {
                if let Some(c) = char::from_u32(rng.random_range(0..0x3_0000)) {
                    break c;
                }
            },
        };
        let reps = if rng.random_bool(0.1) { rng.random_range(2..6) } else { 1 };
        for _ in 0..reps {
            s.push(c);
        }
    }
    s
}
