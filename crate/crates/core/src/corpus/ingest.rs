//! Reading transcript and sentence-pair datasets (JSON Lines or CSV).

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{merge_short_runs, CorpusError, CorpusRecord, RawBody, RawEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    Transcript,
    Pairs,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IngestOptions {
    /// Skip and count malformed lines instead of aborting.
    pub lenient: bool,
    /// Parse as CSV with a header row instead of JSON Lines.
    pub csv: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestStats {
    pub format: SourceFormat,
    pub lines_read: usize,
    pub accepted: usize,
    pub records: usize,
    pub merged_records: usize,
    pub rejected: usize,
    pub rejections: Vec<Rejection>,
    pub per_district: BTreeMap<String, usize>,
    pub mean_word_count: f64,
}

#[derive(Deserialize)]
struct JsonLine {
    id: Option<serde_json::Value>,
    district: Option<String>,
    text: Option<String>,
    local: Option<String>,
    standard: Option<String>,
}

/// Reads a dataset file. CSV is selected by `opts.csv` or a `.csv` extension.
pub fn ingest(
    path: &Path,
    format: SourceFormat,
    opts: IngestOptions,
) -> Result<(Vec<CorpusRecord>, IngestStats), CorpusError> {
    let file = std::fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CorpusError::FileNotFound(path.display().to_string()),
        _ => CorpusError::Io(e),
    })?;
    let is_csv = opts.csv || path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    ingest_reader(file, format, IngestOptions { csv: is_csv, ..opts })
}

/// Writes normalized records as JSON Lines.
pub fn write_records(path: &Path, records: &[CorpusRecord]) -> Result<(), CorpusError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads records written by [`write_records`].
pub fn read_records(path: &Path) -> Result<Vec<CorpusRecord>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CorpusError::FileNotFound(path.display().to_string()),
        std::io::ErrorKind::InvalidData => CorpusError::InvalidEncoding { offset: 0 },
        _ => CorpusError::Io(e),
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CorpusError::FormatError { line: i + 1, reason: e.to_string() })
        })
        .collect()
}

pub fn ingest_reader<R: Read>(
    mut reader: R,
    format: SourceFormat,
    opts: IngestOptions,
) -> Result<(Vec<CorpusRecord>, IngestStats), CorpusError> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let lines = if opts.csv { csv_lines(&bytes)? } else { jsonl_lines(&bytes) };

    let mut entries = Vec::new();
    let mut rejections = Vec::new();
    let lines_read = lines.len();
    for (line_no, parsed) in lines {
        match parsed.and_then(|fields| to_entry(fields, format, line_no)) {
            Ok(entry) => entries.push(entry),
            Err(err) if opts.lenient => rejections.push(Rejection { line: line_no, reason: err.to_string() }),
            Err(err) => return Err(err),
        }
    }

    let accepted = entries.len();
    let mut records: Vec<CorpusRecord> = entries
        .iter()
        .map(|e| match &e.body {
            RawBody::Transcript { text } => CorpusRecord::transcript(&e.id, &e.district, text),
            RawBody::Pair { local, standard } => CorpusRecord::pair(&e.id, &e.district, local, standard),
        })
        .collect();
    if format == SourceFormat::Pairs {
        records = merge_short_runs(records);
    }

    let mut per_district = BTreeMap::new();
    for r in &records {
        *per_district.entry(r.district.clone()).or_insert(0) += 1;
    }
    let mean_word_count = if records.is_empty() {
        0.0
    } else {
        records.iter().map(|r| r.word_count as f64).sum::<f64>() / records.len() as f64
    };
    let stats = IngestStats {
        format,
        lines_read,
        accepted,
        records: records.len(),
        merged_records: records.iter().filter(|r| r.tags.contains(&super::Tag::Merged)).count(),
        rejected: rejections.len(),
        rejections,
        per_district,
        mean_word_count,
    };
    Ok((records, stats))
}

type LineResult = Result<JsonLine, CorpusError>;

fn jsonl_lines(bytes: &[u8]) -> Vec<(usize, LineResult)> {
    bytes
        .split(|&b| b == b'\n')
        .enumerate()
        .filter_map(|(i, raw)| {
            let line_no = i + 1;
            let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
            let text = match std::str::from_utf8(raw) {
                Ok(t) => t,
                Err(e) => {
                    return Some((line_no, Err(CorpusError::InvalidEncoding { offset: e.valid_up_to() })))
                }
            };
            if text.trim().is_empty() {
                return None;
            }
            let parsed = serde_json::from_str::<JsonLine>(text).map_err(|e| CorpusError::FormatError {
                line: line_no,
                reason: format!("invalid JSON: {e}"),
            });
            Some((line_no, parsed))
        })
        .collect()
}

fn csv_lines(bytes: &[u8]) -> Result<Vec<(usize, LineResult)>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(bytes);
    let headers = rdr
        .byte_headers()
        .map_err(|e| CorpusError::FormatError { line: 1, reason: format!("CSV header: {e}") })?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h == name.as_bytes());
    let (id_col, district_col, text_col, local_col, standard_col) =
        (column("id"), column("district"), column("text"), column("local"), column("standard"));

    let mut out = Vec::new();
    for (i, row) in rdr.byte_records().enumerate() {
        let line_no = i + 2;
        let parsed = row
            .map_err(|e| CorpusError::FormatError { line: line_no, reason: format!("CSV: {e}") })
            .and_then(|row| {
                let get = |col: Option<usize>| -> Result<Option<String>, CorpusError> {
                    match col.and_then(|c| row.get(c)) {
                        None => Ok(None),
                        Some(b) => std::str::from_utf8(b)
                            .map(|s| Some(s.to_string()))
                            .map_err(|e| CorpusError::InvalidEncoding { offset: e.valid_up_to() }),
                    }
                };
                Ok(JsonLine {
                    id: get(id_col)?.map(serde_json::Value::String),
                    district: get(district_col)?,
                    text: get(text_col)?,
                    local: get(local_col)?,
                    standard: get(standard_col)?,
                })
            });
        out.push((line_no, parsed));
    }
    Ok(out)
}

fn to_entry(line: JsonLine, format: SourceFormat, line_no: usize) -> Result<RawEntry, CorpusError> {
    let fail = |reason: &str| CorpusError::FormatError { line: line_no, reason: reason.to_string() };
    let id = match line.id {
        Some(serde_json::Value::String(s)) if !s.trim().is_empty() => s.trim().to_string(),
        Some(serde_json::Value::Number(n)) => n.to_string(),
        _ => return Err(fail("missing or empty \"id\"")),
    };
    let district = line.district.unwrap_or_default();
    if district.trim().is_empty() {
        return Err(fail("missing or empty \"district\""));
    }
    if district.contains('|') {
        return Err(fail("\"district\" must not contain '|'"));
    }
    let body = match format {
        SourceFormat::Transcript => {
            let text = line.text.unwrap_or_default();
            if text.trim().is_empty() {
                return Err(fail("missing or empty \"text\""));
            }
            RawBody::Transcript { text }
        }
        SourceFormat::Pairs => {
            if line.local.is_none() && line.standard.is_none() {
                return Err(fail("missing \"local\"/\"standard\""));
            }
            let local = line.local.unwrap_or_default();
            let standard = line.standard.unwrap_or_default();
            if local.trim().is_empty() && standard.trim().is_empty() {
                return Err(fail("both \"local\" and \"standard\" are empty"));
            }
            RawBody::Pair { local, standard }
        }
    };
    Ok(RawEntry { id, district: district.trim().to_string(), body, source_line: line_no })
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAIRS: &str = r#"{"id":"1","district":"Chittagong","local":"tui kothay jaibi ajke","standard":"tumi kothay jabe aaj"}
{"id":"2","district":"Chittagong","local":"ki re","standard":"ki"}
{"id":"3","district":"Sylhet","local":"ami bari jaimu","standard":"ami bari jabo"}
"#;

    #[test]
    fn clean_pairs() {
        let (recs, stats) = ingest_reader(PAIRS.as_bytes(), SourceFormat::Pairs, IngestOptions::default()).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(stats.rejected, 0);
        assert_eq!(stats.per_district["Chittagong"], 2);
        assert_eq!(stats.lines_read, 3);
    }

    #[test]
    fn malformed_line_strict_and_lenient() {
        let text = format!("{PAIRS}{{\"id\":\"4\",\"district\":\"\"}}\n");
        let err = ingest_reader(text.as_bytes(), SourceFormat::Pairs, IngestOptions::default()).unwrap_err();
        assert!(matches!(err, CorpusError::FormatError { line: 4, .. }));
        let (recs, stats) = ingest_reader(
            text.as_bytes(),
            SourceFormat::Pairs,
            IngestOptions { lenient: true, ..Default::default() },
        )
        .unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(stats.rejected, 1);
        assert_eq!(stats.rejections[0].line, 4);
    }

    #[test]
    fn invalid_utf8_line() {
        let mut bytes = PAIRS.as_bytes().to_vec();
        bytes.extend_from_slice(b"{\"id\":\"9\",\"district\":\"A\",\"text\":\"\xFF\"}\n");
        let err = ingest_reader(&bytes[..], SourceFormat::Transcript, IngestOptions::default()).unwrap_err();
        // first line lacks "text" in transcript format
        assert!(matches!(err, CorpusError::FormatError { line: 1, .. }));
        let transcript = b"{\"id\":\"9\",\"district\":\"A\",\"text\":\"\xFF\"}\n";
        let err = ingest_reader(&transcript[..], SourceFormat::Transcript, IngestOptions::default()).unwrap_err();
        assert!(matches!(err, CorpusError::InvalidEncoding { .. }));
    }

    #[test]
    fn transcript_csv() {
        let csv = "id,district,text\n1,sylhet,  ami   bari jaimu \n2,Narail,\"tumi, ki\"\n";
        let (recs, stats) = ingest_reader(
            csv.as_bytes(),
            SourceFormat::Transcript,
            IngestOptions { csv: true, ..Default::default() },
        )
        .unwrap();
        assert_eq!(recs[0].text_norm, "ami bari jaimu");
        assert_eq!(recs[0].district, "Sylhet");
        assert_eq!(recs[1].text_norm, "tumi, ki");
        assert_eq!(stats.records, 2);
        assert!((stats.mean_word_count - 3.0).abs() < 1e-12);
    }

    #[test]
    fn missing_file() {
        let err = ingest(Path::new("/nonexistent/x.jsonl"), SourceFormat::Pairs, IngestOptions::default()).unwrap_err();
        assert!(matches!(err, CorpusError::FileNotFound(_)));
    }
}
