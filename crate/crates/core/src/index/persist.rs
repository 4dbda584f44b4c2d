//! Index container:
//!
//! ```text
//! "DFIX" | u32 version | u32 dim | u32 n | n*dim f32 (row-major)
//! | postings section | metadata section (JSON) | u64 checksum
//! ```
//!
//! All integers and floats are little-endian. The checksum is the first
//! eight bytes of SHA-256 over everything before it.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Bm25Params, DenseIndex, HybridIndex, IndexError, SparseIndex};
use crate::corpus::CorpusRecord;

pub const MAGIC: &[u8; 4] = b"DFIX";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Metadata {
    embedder: String,
    records: Vec<CorpusRecord>,
}

pub(crate) fn checksum(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

impl HybridIndex {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, FORMAT_VERSION);
        put_u32(&mut out, self.dense.dim() as u32);
        put_u32(&mut out, self.dense.len() as u32);
        for v in self.dense.matrix() {
            out.extend_from_slice(&v.to_le_bytes());
        }

        let sparse = &self.sparse;
        out.extend_from_slice(&sparse.params.k1.to_le_bytes());
        out.extend_from_slice(&sparse.params.b.to_le_bytes());
        for &len in &sparse.doc_lengths {
            put_u32(&mut out, len);
        }
        put_u32(&mut out, sparse.postings.len() as u32);
        for (term, list) in &sparse.postings {
            put_bytes(&mut out, term.as_bytes());
            put_u32(&mut out, list.len() as u32);
            for &(row, tf) in list {
                put_u32(&mut out, row);
                put_u32(&mut out, tf);
            }
        }

        let meta = Metadata { embedder: self.embedder.clone(), records: self.records.clone() };
        put_bytes(&mut out, &serde_json::to_vec(&meta).expect("records serialize"));

        let sum = checksum(&out);
        out.extend_from_slice(&sum.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IndexError> {
        if bytes.len() >= 4 && &bytes[..4] != MAGIC {
            return Err(IndexError::BadMagic);
        }
        if bytes.len() >= 8 {
            let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
            if version != FORMAT_VERSION {
                return Err(IndexError::VersionMismatch { found: version, expected: FORMAT_VERSION });
            }
        }
        if bytes.len() < 20 {
            return Err(IndexError::ChecksumMismatch);
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        if checksum(body) != u64::from_le_bytes(tail.try_into().unwrap()) {
            return Err(IndexError::ChecksumMismatch);
        }

        let mut r = Reader { bytes: body, pos: 8 };
        let dim = r.u32()? as usize;
        let n = r.u32()? as usize;
        let mut matrix = Vec::with_capacity(dim * n);
        for _ in 0..dim * n {
            matrix.push(f32::from_le_bytes(r.take(4)?.try_into().unwrap()));
        }

        let k1 = r.f64()?;
        let b = r.f64()?;
        let mut doc_lengths = Vec::with_capacity(n);
        for _ in 0..n {
            doc_lengths.push(r.u32()?);
        }
        let n_terms = r.u32()?;
        let mut postings = BTreeMap::new();
        for _ in 0..n_terms {
            let term = String::from_utf8(r.bytes()?.to_vec()).map_err(|_| IndexError::Corrupt("term is not UTF-8".into()))?;
            let len = r.u32()?;
            let mut list = Vec::with_capacity(len as usize);
            for _ in 0..len {
                let row = r.u32()?;
                if row as usize >= n {
                    return Err(IndexError::Corrupt(format!("posting row {row} out of range")));
                }
                list.push((row, r.u32()?));
            }
            postings.insert(term, list);
        }

        let meta: Metadata =
            serde_json::from_slice(r.bytes()?).map_err(|e| IndexError::Corrupt(format!("metadata: {e}")))?;
        if r.pos != body.len() {
            return Err(IndexError::Corrupt("trailing bytes".into()));
        }
        if meta.records.len() != n {
            return Err(IndexError::Corrupt(format!("{} records for {n} rows", meta.records.len())));
        }
        let ids: Vec<String> = meta.records.iter().map(|rec| rec.id.clone()).collect();
        let dense = DenseIndex::from_raw(dim, ids.clone(), matrix)?;
        let sparse = SparseIndex::from_parts(Bm25Params { k1, b }, ids, doc_lengths, postings);
        Ok(HybridIndex { records: meta.records, dense, sparse, embedder: meta.embedder })
    }

    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        f.sync_all()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IndexError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    out.extend_from_slice(&(b.len() as u64).to_le_bytes());
    out.extend_from_slice(b);
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IndexError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| IndexError::Corrupt("unexpected end of data".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, IndexError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn bytes(&mut self) -> Result<&'a [u8], IndexError> {
        let len = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        self.take(usize::try_from(len).map_err(|_| IndexError::Corrupt("length overflow".into()))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::HashedNgramEmbedder;

    fn sample() -> HybridIndex {
        let recs = vec![
            CorpusRecord::pair("1", "Chittagong", "tui kothay jaibi", "tumi kothay jabe"),
            CorpusRecord::pair("2", "Sylhet", "ki re", "ki"),
        ];
        HybridIndex::build(recs, &HashedNgramEmbedder::new(16)).unwrap()
    }

    #[test]
    fn bytes_round_trip() {
        let idx = sample();
        assert_eq!(HybridIndex::from_bytes(&idx.to_bytes()).unwrap(), idx);
    }

    #[test]
    fn truncated_rejected_by_checksum() {
        let bytes = sample().to_bytes();
        for cut in [9, 30, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(HybridIndex::from_bytes(&bytes[..cut]), Err(IndexError::ChecksumMismatch)), "cut {cut}");
        }
    }

    #[test]
    fn flipped_byte_rejected() {
        let mut bytes = sample().to_bytes();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(matches!(HybridIndex::from_bytes(&bytes), Err(IndexError::ChecksumMismatch)));
    }

    #[test]
    fn version_bump_rejected() {
        let mut bytes = sample().to_bytes();
        bytes[4] += 1;
        assert!(matches!(
            HybridIndex::from_bytes(&bytes),
            Err(IndexError::VersionMismatch { found: 2, expected: 1 })
        ));
        assert!(matches!(HybridIndex::from_bytes(b"NOPE\x01\0\0\0"), Err(IndexError::BadMagic)));
    }
}
