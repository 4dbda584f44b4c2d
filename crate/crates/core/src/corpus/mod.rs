//! Dialect corpus records: normalization, short-fragment tagging, merging of
//! consecutive short entries, and the structured text embedded for pairs.

mod ingest;
mod normalize;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ingest::{ingest, ingest_reader, read_records, write_records, IngestOptions, IngestStats, Rejection, SourceFormat};
pub use normalize::{
    normalize_basic, normalize_basic_bytes, normalize_full, normalize_full_bytes, tokenize,
};

/// Records with fewer tokens than this are tagged `[[SHORT]]` at index time.
pub const SHORT_RECORD_TOKENS: usize = 3;

/// Districts covered by the transcript and sentence-pair datasets.
pub const KNOWN_DISTRICTS: [&str; 12] = [
    "Barishal",
    "Chittagong",
    "Comilla",
    "Habiganj",
    "Kishoreganj",
    "Narail",
    "Narsingdi",
    "Noakhali",
    "Rangpur",
    "Sandwip",
    "Sylhet",
    "Tangail",
];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid UTF-8 (valid up to byte {offset})")]
    InvalidEncoding { offset: usize },
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("line {line}: {reason}")]
    FormatError { line: usize, reason: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Tag {
    Short,
    Question,
    Merged,
}

impl Tag {
    pub fn marker(self) -> &'static str {
        match self {
            Tag::Short => "[[SHORT]]",
            Tag::Question => "[[QUESTION]]",
            Tag::Merged => "[[MERGED]]",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.marker())
    }
}

/// Which dataset shape a record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Transcript,
    Pair,
}

/// One line of an input dataset after decoding, before normalization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawEntry {
    pub id: String,
    pub district: String,
    pub body: RawBody,
    pub source_line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RawBody {
    Transcript { text: String },
    Pair { local: String, standard: String },
}

/// A normalized dialect example ready for indexing.
///
/// For pairs, `text_norm` holds the untagged local sentence; `local_norm_tagged`
/// carries the tag markers and `structured` is the string that gets embedded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub district: String,
    pub kind: RecordKind,
    pub text_norm: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub local_norm_tagged: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub standard_norm: String,
    #[serde(default)]
    pub tags: BTreeSet<Tag>,
    pub word_count: usize,
    pub complexity: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub structured: String,
}

impl CorpusRecord {
    /// Transcript record: basic cleaning only.
    pub fn transcript(id: &str, district: &str, text: &str) -> Self {
        let text_norm = normalize_basic(text);
        let (word_count, complexity) = quality_metrics(&text_norm);
        CorpusRecord {
            id: id.to_string(),
            district: canonical_district(district),
            kind: RecordKind::Transcript,
            text_norm,
            local_norm_tagged: String::new(),
            standard_norm: String::new(),
            tags: BTreeSet::new(),
            word_count,
            complexity,
            structured: String::new(),
        }
    }

    /// Sentence-pair record with full normalization and tagging applied.
    pub fn pair(id: &str, district: &str, local: &str, standard: &str) -> Self {
        let local_norm = normalize_full(local);
        let (word_count, complexity) = quality_metrics(&local_norm);
        let mut rec = CorpusRecord {
            id: id.to_string(),
            district: canonical_district(district),
            kind: RecordKind::Pair,
            text_norm: local_norm,
            local_norm_tagged: String::new(),
            standard_norm: normalize_full(standard),
            tags: BTreeSet::new(),
            word_count,
            complexity,
            structured: String::new(),
        };
        rec = tag_record(rec);
        rec
    }

    /// The text embedded in the dense index and tokenized for BM25.
    pub fn index_text(&self) -> &str {
        match self.kind {
            RecordKind::Transcript => &self.text_norm,
            RecordKind::Pair => &self.structured,
        }
    }

    /// Untagged dialect-side text.
    pub fn local_text(&self) -> &str {
        &self.text_norm
    }

    fn refresh_pair_fields(&mut self) {
        let mut tagged = self.text_norm.clone();
        for tag in &self.tags {
            if !tagged.is_empty() {
                tagged.push(' ');
            }
            tagged.push_str(tag.marker());
        }
        self.local_norm_tagged = tagged;
        self.structured = render_structured(&self.district, &self.standard_norm, &self.local_norm_tagged);
    }
}

/// Title-cases each word of a district name ("chittagong" -> "Chittagong").
pub fn canonical_district(name: &str) -> String {
    normalize_basic(name)
        .split(' ')
        .map(|w| {
            let mut chars = w.chars();
            match chars.next() {
                Some(first) => first.to_uppercase().chain(chars.flat_map(char::to_lowercase)).collect(),
                None => String::new(),
            }
        })
        .collect::<Vec<String>>()
        .join(" ")
}

/// Applies SHORT and QUESTION tags to a pair record and re-renders the
/// tagged local text and structured representation. Merged records keep
/// their MERGED tag and are never re-tagged SHORT.
pub fn tag_record(mut rec: CorpusRecord) -> CorpusRecord {
    if rec.kind != RecordKind::Pair {
        return rec;
    }
    let tokens = tokenize(&rec.text_norm);
    rec.tags.remove(&Tag::Short);
    rec.tags.remove(&Tag::Question);
    if !rec.tags.contains(&Tag::Merged) && tokens.len() < SHORT_RECORD_TOKENS {
        rec.tags.insert(Tag::Short);
    }
    if rec.text_norm.ends_with('?') || rec.text_norm.ends_with('？') {
        rec.tags.insert(Tag::Question);
    }
    rec.refresh_pair_fields();
    rec
}

pub fn render_structured(district: &str, standard: &str, local_tagged: &str) -> String {
    format!("District: {district} | STANDARD: {standard} | LOCAL: {local_tagged}")
}

/// Splits a structured representation back into (district, standard, local).
pub fn parse_structured(s: &str) -> Option<(String, String, String)> {
    let rest = s.strip_prefix("District: ")?;
    let parts: Vec<&str> = rest.split(" | ").collect();
    if parts.len() != 3 {
        return None;
    }
    let standard = parts[1].strip_prefix("STANDARD: ").or_else(|| (parts[1] == "STANDARD:").then_some(""))?;
    let local = parts[2].strip_prefix("LOCAL: ").or_else(|| (parts[2] == "LOCAL:").then_some(""))?;
    Some((parts[0].to_string(), standard.to_string(), local.to_string()))
}

/// Replaces each maximal run of two or more consecutive SHORT records from
/// the same district with one MERGED record.
pub fn merge_short_runs(records: Vec<CorpusRecord>) -> Vec<CorpusRecord> {
    let mut out = Vec::with_capacity(records.len());
    let mut run: Vec<CorpusRecord> = Vec::new();
    for rec in records {
        let continues = rec.tags.contains(&Tag::Short)
            && run.last().is_some_and(|last| last.district == rec.district);
        if !continues {
            flush_run(&mut run, &mut out);
        }
        if rec.tags.contains(&Tag::Short) {
            run.push(rec);
        } else {
            out.push(rec);
        }
    }
    flush_run(&mut run, &mut out);
    out
}

fn flush_run(run: &mut Vec<CorpusRecord>, out: &mut Vec<CorpusRecord>) {
    match run.len() {
        0 => {}
        1 => out.append(run),
        _ => {
            let parts = std::mem::take(run);
            out.push(merge_records(&parts));
        }
    }
}

fn merge_records(parts: &[CorpusRecord]) -> CorpusRecord {
    let join = |f: fn(&CorpusRecord) -> &str| {
        parts.iter().map(f).filter(|s| !s.is_empty()).collect::<Vec<_>>().join(" ")
    };
    let text_norm = join(|r| &r.text_norm);
    let (word_count, complexity) = quality_metrics(&text_norm);
    let mut merged = CorpusRecord {
        id: parts.iter().map(|r| r.id.as_str()).collect::<Vec<_>>().join("+"),
        district: parts[0].district.clone(),
        kind: RecordKind::Pair,
        text_norm,
        local_norm_tagged: String::new(),
        standard_norm: join(|r| &r.standard_norm),
        tags: BTreeSet::from([Tag::Merged]),
        word_count,
        complexity,
        structured: String::new(),
    };
    merged = tag_record(merged);
    merged
}

/// (token count, unique-token ratio x mean token length in characters).
pub fn quality_metrics(text: &str) -> (usize, f64) {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return (0, 0.0);
    }
    let n = tokens.len();
    let unique: BTreeSet<&str> = tokens.iter().map(String::as_str).collect();
    let total_chars: usize = tokens.iter().map(|t| t.chars().count()).sum();
    let complexity = (unique.len() as f64 / n as f64) * (total_chars as f64 / n as f64);
    (n, complexity)
}
