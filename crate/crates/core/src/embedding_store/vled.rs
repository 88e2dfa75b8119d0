//! The `VLED` embedding container.
//!
//! Little-endian layout:
//!
//! ```text
//! offset  size      field
//! 0       4         magic "VLED"
//! 4       1         version (0x01)
//! 5       4         record count n (u32)
//! 9       4         dimension d (u32)
//! 13      variable  id block: n x (u16 byte length, UTF-8 bytes)
//! ...     4*n*d     data block: f32 components, row-major in record order
//! ```
//!
//! Every decoding error carries the byte offset where the problem was found.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use super::{EmbeddingSet, SampleId, StoreError};

pub const MAGIC: [u8; 4] = *b"VLED";
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 13;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormatError {
    #[error("bad magic at offset {offset}")]
    BadMagic { offset: u64 },
    #[error("unsupported version {version:#04x} at offset {offset}")]
    UnsupportedVersion { offset: u64, version: u8 },
    #[error("truncated at offset {offset}: {needed} more bytes required")]
    Truncated { offset: u64, needed: u64 },
    #[error("dimension must be positive (offset {offset})")]
    InvalidDimension { offset: u64 },
    #[error("empty sample id at offset {offset}")]
    EmptyId { offset: u64 },
    #[error("sample id at offset {offset} is not valid UTF-8")]
    InvalidUtf8 { offset: u64 },
    #[error("duplicate sample id {id:?} at offset {offset}")]
    DuplicateId { offset: u64, id: String },
    #[error("non-finite component {component} of record {record} at offset {offset}")]
    NonFiniteComponent { offset: u64, record: usize, component: usize },
    #[error("record {record} is an all-zero vector (offset {offset})")]
    ZeroVector { offset: u64, record: usize },
    #[error("{count} unexpected trailing bytes at offset {offset}")]
    TrailingBytes { offset: u64, count: u64 },
}

impl FormatError {
    pub fn offset(&self) -> u64 {
        match *self {
            FormatError::BadMagic { offset }
            | FormatError::UnsupportedVersion { offset, .. }
            | FormatError::Truncated { offset, .. }
            | FormatError::InvalidDimension { offset }
            | FormatError::EmptyId { offset }
            | FormatError::InvalidUtf8 { offset }
            | FormatError::DuplicateId { offset, .. }
            | FormatError::NonFiniteComponent { offset, .. }
            | FormatError::ZeroVector { offset, .. }
            | FormatError::TrailingBytes { offset, .. } => offset,
        }
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8], FormatError> {
        let rest = self.buf.len() - self.pos;
        if rest < len {
            return Err(FormatError::Truncated { offset: self.pos as u64, needed: (len - rest) as u64 });
        }
        let out = &self.buf[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Parses a complete `VLED` buffer.
pub fn decode(buf: &[u8]) -> Result<EmbeddingSet, FormatError> {
    let mut cur = Cursor { buf, pos: 0 };
    let magic = cur.take(4).map_err(|_| FormatError::BadMagic { offset: 0 })?;
    if magic != MAGIC {
        return Err(FormatError::BadMagic { offset: 0 });
    }
    let version = cur.take(1)?[0];
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion { offset: 4, version });
    }
    let n = cur.u32()? as usize;
    let d = cur.u32()? as usize;
    if d == 0 {
        return Err(FormatError::InvalidDimension { offset: 9 });
    }

    // Each id takes at least three bytes, which bounds the allocation for
    // headers that claim more records than the file can hold.
    let mut ids = Vec::with_capacity(n.min((buf.len() - cur.pos) / 3));
    let mut seen = HashSet::new();
    for _ in 0..n {
        let at = cur.pos as u64;
        let len = cur.u16()? as usize;
        if len == 0 {
            return Err(FormatError::EmptyId { offset: at });
        }
        let bytes = cur.take(len)?;
        let s = std::str::from_utf8(bytes).map_err(|_| FormatError::InvalidUtf8 { offset: at + 2 })?;
        if !seen.insert(s) {
            return Err(FormatError::DuplicateId { offset: at, id: s.to_owned() });
        }
        ids.push(SampleId::new(s).expect("length already checked"));
    }

    let data_start = cur.pos;
    let row_bytes = d.checked_mul(4);
    let total = row_bytes.and_then(|r| r.checked_mul(n));
    let rest = buf.len() - data_start;
    let total = match total {
        Some(t) if t <= rest => t,
        _ => {
            let row_bytes = row_bytes.unwrap_or(usize::MAX);
            let complete = rest / row_bytes;
            let offset = data_start + complete * row_bytes;
            let needed = row_bytes.saturating_sub(rest - complete * row_bytes);
            return Err(FormatError::Truncated { offset: offset as u64, needed: needed as u64 });
        }
    };
    if rest > total {
        return Err(FormatError::TrailingBytes { offset: (data_start + total) as u64, count: (rest - total) as u64 });
    }

    let mut data = Vec::with_capacity(n * d);
    for (record, row) in buf[data_start..].chunks_exact(d * 4).enumerate() {
        let row_at = data_start + record * d * 4;
        let mut all_zero = true;
        for (component, bytes) in row.chunks_exact(4).enumerate() {
            let x = f32::from_le_bytes(bytes.try_into().unwrap());
            if !x.is_finite() {
                return Err(FormatError::NonFiniteComponent {
                    offset: (row_at + component * 4) as u64,
                    record,
                    component,
                });
            }
            all_zero &= x == 0.0;
            data.push(x);
        }
        if all_zero {
            return Err(FormatError::ZeroVector { offset: row_at as u64, record });
        }
    }
    Ok(EmbeddingSet::from_parts(d, ids, data).expect("validated during decode"))
}

/// Serialises a set into `VLED` bytes. Output depends only on the set contents.
pub fn encode(set: &EmbeddingSet) -> Vec<u8> {
    let id_bytes: usize = set.ids().iter().map(|id| 2 + id.as_str().len()).sum();
    let mut out = Vec::with_capacity(HEADER_LEN + id_bytes + set.data().len() * 4);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(set.len() as u32).to_le_bytes());
    out.extend_from_slice(&(set.dim() as u32).to_le_bytes());
    for id in set.ids() {
        out.extend_from_slice(&(id.as_str().len() as u16).to_le_bytes());
        out.extend_from_slice(id.as_str().as_bytes());
    }
    for x in set.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet, StoreError> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|e| StoreError::io(path, e))?;
    decode(&buf).map_err(StoreError::from)
}

pub fn write_embeddings(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<(), StoreError> {
    let path = path.as_ref();
    fs::write(path, encode(set)).map_err(|e| StoreError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sid(s: &str) -> SampleId {
        SampleId::new(s).unwrap()
    }

    fn three_records(poison: Option<(usize, usize)>) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(b"VLED");
        buf.push(1);
        buf.extend_from_slice(&3u32.to_le_bytes());
        buf.extend_from_slice(&2u32.to_le_bytes());
        for id in ["a", "b", "c"] {
            buf.extend_from_slice(&1u16.to_le_bytes());
            buf.extend_from_slice(id.as_bytes());
        }
        for r in 0..3 {
            for c in 0..2 {
                let x = if poison == Some((r, c)) { f32::NAN } else { 1.0 + r as f32 };
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        buf
    }

    #[test]
    fn minimal_file() {
        let mut buf = b"VLED\x01".to_vec();
        buf.extend_from_slice(&1u32.to_le_bytes());
        buf.extend_from_slice(&2u32.to_le_bytes());
        buf.extend_from_slice(&[1, 0, b'a']);
        buf.extend_from_slice(&1.0f32.to_le_bytes());
        buf.extend_from_slice(&0.0f32.to_le_bytes());
        let s = decode(&buf).unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.len(), 1);
        assert_eq!(s.vector(0), &[1.0, 0.0]);
    }

    #[test]
    fn nan_offset_follows_layout() {
        // header 13 + ids 3 * (2 + 1) = 22; record 1 component 1 sits 12 bytes further.
        let err = decode(&three_records(Some((1, 1)))).unwrap_err();
        assert_eq!(err, FormatError::NonFiniteComponent { offset: 34, record: 1, component: 1 });
        assert!(decode(&three_records(None)).is_ok());
    }

    #[test]
    fn empty_set_is_header_only() {
        let bytes = encode(&EmbeddingSet::empty(512).unwrap());
        assert_eq!(bytes.len(), HEADER_LEN);
        let back = decode(&bytes).unwrap();
        assert_eq!(back.dim(), 512);
        assert!(back.is_empty());
    }

    #[test]
    fn header_errors() {
        assert_eq!(decode(b"VLE"), Err(FormatError::BadMagic { offset: 0 }));
        assert_eq!(decode(b"XLED\x01"), Err(FormatError::BadMagic { offset: 0 }));
        assert_eq!(
            decode(b"VLED\x02\0\0\0\0\x01\0\0\0"),
            Err(FormatError::UnsupportedVersion { offset: 4, version: 2 })
        );
        assert_eq!(decode(b"VLED\x01\0\0"), Err(FormatError::Truncated { offset: 5, needed: 2 }));
        assert_eq!(decode(b"VLED\x01\0\0\0\0\0\0\0\0"), Err(FormatError::InvalidDimension { offset: 9 }));
    }

    #[test]
    fn body_errors() {
        let good = three_records(None);
        assert_eq!(decode(&good[..good.len() - 1]), Err(FormatError::Truncated { offset: 38, needed: 1 }));
        let mut long = good.clone();
        long.push(0);
        assert_eq!(decode(&long), Err(FormatError::TrailingBytes { offset: 46, count: 1 }));

        let mut dup = good.clone();
        dup[18] = b'a';
        assert_eq!(decode(&dup), Err(FormatError::DuplicateId { offset: 16, id: "a".into() }));

        let mut bad_utf8 = good.clone();
        bad_utf8[15] = 0xff;
        assert_eq!(decode(&bad_utf8), Err(FormatError::InvalidUtf8 { offset: 15 }));

        let mut empty_id = good;
        empty_id[13] = 0;
        assert!(matches!(decode(&empty_id), Err(FormatError::EmptyId { offset: 13 })));
    }

    #[test]
    fn huge_count_is_rejected_without_allocating() {
        let mut buf = b"VLED\x01".to_vec();
        buf.extend_from_slice(&u32::MAX.to_le_bytes());
        buf.extend_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(decode(&buf), Err(FormatError::Truncated { offset: 13, .. })));
    }

    #[test]
    fn repeated_writes_are_byte_identical() {
        let set =
            EmbeddingSet::new(3, vec![(sid("x"), vec![0.1, -2.0, 3.5]), (sid("yy"), vec![1e-30, 0.0, -0.0])]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("a.vled"), dir.path().join("b.vled"));
        write_embeddings(&set, &p1).unwrap();
        write_embeddings(&set, &p2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
        assert_eq!(read_embeddings(&p1).unwrap(), set);
    }
}
