//! Text normalization and tokenization shared by indexing, retrieval and scoring.

use unicode_normalization::UnicodeNormalization;

use super::CorpusError;

const ZERO_WIDTH: [char; 4] = ['\u{200B}', '\u{200C}', '\u{200D}', '\u{FEFF}'];

/// Punctuation detached from token edges by [`tokenize`].
const EDGE_PUNCT: [char; 7] = ['।', '॥', '.', ',', '?', '？', '!'];

/// Decode raw bytes as UTF-8 and apply [`normalize_basic`].
pub fn normalize_basic_bytes(bytes: &[u8]) -> Result<String, CorpusError> {
    let text = std::str::from_utf8(bytes).map_err(|e| CorpusError::InvalidEncoding {
        offset: e.valid_up_to(),
    })?;
    Ok(normalize_basic(text))
}

/// Trim and collapse every whitespace run to a single ASCII space.
pub fn normalize_basic(text: &str) -> String {
    collapse_whitespace(text)
}

/// Decode raw bytes as UTF-8 and apply [`normalize_full`].
pub fn normalize_full_bytes(bytes: &[u8]) -> Result<String, CorpusError> {
    let text = std::str::from_utf8(bytes).map_err(|e| CorpusError::InvalidEncoding {
        offset: e.valid_up_to(),
    })?;
    Ok(normalize_full(text))
}

/// Full normalization used for sentence pairs and Pipeline-2 queries.
///
/// Zero-width characters are dropped before NFC composition so that a
/// removed joiner can never expose a new composable pair on a second pass.
/// Bengali digits become ASCII, quote and dash variants are unified, the
/// ASCII pipe becomes a danda, runs of three or more identical non-digit
/// characters shrink to two, and whitespace is collapsed.
pub fn normalize_full(text: &str) -> String {
    let stripped: String = text.chars().filter(|c| !ZERO_WIDTH.contains(c)).collect();
    let mapped: String = stripped.nfc().map(map_char).collect();
    let collapsed = collapse_char_runs(&mapped);
    collapse_whitespace(&collapsed)
}

fn map_char(c: char) -> char {
    match c {
        '০'..='৯' => char::from(b'0' + (c as u32 - '০' as u32) as u8),
        '\u{201C}' | '\u{201D}' | '\u{201E}' | '\u{201F}' | '\u{2033}' | '\u{00AB}' | '\u{00BB}' => '"',
        '\u{2018}' | '\u{2019}' | '\u{201A}' | '\u{201B}' | '\u{2032}' => '\'',
        '\u{2010}' | '\u{2011}' | '\u{2012}' | '\u{2013}' | '\u{2014}' | '\u{2015}' | '\u{2212}' => '-',
        '|' => '।',
        other => other,
    }
}

fn collapse_char_runs(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut prev: Option<char> = None;
    let mut run = 0usize;
    for c in text.chars() {
        if Some(c) == prev {
            run += 1;
        } else {
            prev = Some(c);
            run = 1;
        }
        if run <= 2 || c.is_numeric() || c.is_whitespace() {
            out.push(c);
        }
    }
    out
}

fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Whitespace split with leading and trailing punctuation detached into
/// single-character tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        let chars: Vec<char> = word.chars().collect();
        let start = chars.iter().take_while(|c| EDGE_PUNCT.contains(c)).count();
        if start == chars.len() {
            tokens.extend(chars.iter().map(|c| c.to_string()));
            continue;
        }
        let end = chars.len() - chars.iter().rev().take_while(|c| EDGE_PUNCT.contains(c)).count();
        tokens.extend(chars[..start].iter().map(|c| c.to_string()));
        tokens.push(chars[start..end].iter().collect());
        tokens.extend(chars[end..].iter().map(|c| c.to_string()));
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_collapses_and_trims() {
        assert_eq!(normalize_basic("  abc   def "), "abc def");
        assert_eq!(normalize_basic("abc"), "abc");
        assert_eq!(normalize_basic("a\tb\n\nc"), "a b c");
    }

    #[test]
    fn basic_rejects_malformed_utf8() {
        assert!(matches!(
            normalize_basic_bytes(&[0xFF, 0xFE]),
            Err(CorpusError::InvalidEncoding { offset: 0 })
        ));
        assert!(normalize_full_bytes(&[b'a', 0xC3]).is_err());
    }

    #[test]
    fn bengali_digits_map_to_ascii() {
        assert_eq!(normalize_full("২০২৩"), "2023");
        // whole block, checked against code points U+09E6..=U+09EF
        let block: String = (0x09E6u32..=0x09EF).map(|u| char::from_u32(u).unwrap()).collect();
        assert_eq!(normalize_full(&block), "0123456789");
    }

    #[test]
    fn runs_collapse_to_two() {
        assert_eq!(normalize_full("hi!!!!!"), "hi!!");
        assert_eq!(normalize_full("aa"), "aa");
        assert_eq!(normalize_full("1111"), "1111");
        assert_eq!(normalize_full("৫৫৫৫"), "5555");
    }

    #[test]
    fn zero_width_removed() {
        assert_eq!(normalize_full("a\u{200B}b"), "ab");
        assert_eq!(normalize_full("\u{FEFF}x\u{200D}"), "x");
    }

    #[test]
    fn danda_kept_and_pipe_mapped() {
        assert_eq!(normalize_full("ami jai।"), "ami jai।");
        assert_eq!(normalize_full("ami jai |"), "ami jai ।");
        assert_eq!(normalize_full("“ki” – ‘na’"), "\"ki\" - 'na'");
    }

    #[test]
    fn nfc_applied() {
        assert_eq!(normalize_full("e\u{0301}"), "\u{00E9}");
        // nukta sequence composes under NFC? It must at least be stable.
        let once = normalize_full("\u{09A1}\u{09BC}");
        assert_eq!(normalize_full(&once), once);
    }

    #[test]
    fn tokenize_detaches_edge_punctuation() {
        assert_eq!(tokenize("ami bhalo achi?"), ["ami", "bhalo", "achi", "?"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("ek  dui"), ["ek", "dui"]);
        assert_eq!(tokenize("\"ki\"!!"), ["\"ki\"", "!", "!"]);
        assert_eq!(tokenize("।ami।"), ["।", "ami", "।"]);
        assert_eq!(tokenize("?!"), ["?", "!"]);
        assert_eq!(tokenize("3.5 kg."), ["3.5", "kg", "."]);
        assert_eq!(tokenize("x [[SHORT]]"), ["x", "[[SHORT]]"]);
    }
}
