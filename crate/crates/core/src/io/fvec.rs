//! `.fvec` feature interchange files.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "FVC1" | version u16 = 1 | count u32 | dim u32
//! count × ( id_len u16 | id bytes (UTF-8) | label u8 | dim × f32 )
//! ```

use std::fs;
use std::path::Path;

use super::label::Label;
use crate::error::{Error, Result};

pub const FVEC_MAGIC: [u8; 4] = *b"FVC1";
pub const FVEC_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4;

/// One recording's fixed-length representation.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRecord {
    pub recording_id: String,
    pub label: Label,
    pub values: Vec<f32>,
}

impl FeatureRecord {
    pub fn new(recording_id: impl Into<String>, label: Label, values: Vec<f32>) -> Self {
        Self {
            recording_id: recording_id.into(),
            label,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

pub fn encode_fvec(records: &[FeatureRecord]) -> Result<Vec<u8>> {
    let first = records.first().ok_or(Error::Empty("record list"))?;
    let dim = first.dim();
    if dim == 0 {
        return Err(Error::InvalidRecord("feature dimension must be positive".into()));
    }
    let count = u32::try_from(records.len())
        .map_err(|_| Error::InvalidRecord(format!("{} records exceed u32", records.len())))?;
    let dim_u32 =
        u32::try_from(dim).map_err(|_| Error::InvalidRecord(format!("dimension {dim} exceeds u32")))?;

    let payload: usize = records
        .iter()
        .map(|r| 2 + r.recording_id.len() + 1 + 4 * r.dim())
        .sum();
    let mut buf = Vec::with_capacity(HEADER_LEN + payload);
    buf.extend_from_slice(&FVEC_MAGIC);
    buf.extend_from_slice(&FVEC_VERSION.to_le_bytes());
    buf.extend_from_slice(&count.to_le_bytes());
    buf.extend_from_slice(&dim_u32.to_le_bytes());

    for r in records {
        if r.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: r.dim(),
                context: format!("record {}", r.recording_id),
            });
        }
        let id_len = u16::try_from(r.recording_id.len())
            .map_err(|_| Error::InvalidRecord(format!("id too long: {} bytes", r.recording_id.len())))?;
        buf.extend_from_slice(&id_len.to_le_bytes());
        buf.extend_from_slice(r.recording_id.as_bytes());
        buf.push(r.label as u8);
        for v in &r.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(buf)
}

pub fn decode_fvec(bytes: &[u8]) -> Result<Vec<FeatureRecord>> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic: [u8; 4] = cur.take(4, "magic")?.try_into().unwrap();
    if magic != FVEC_MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let version = cur.u16("version")?;
    if version != FVEC_VERSION {
        return Err(Error::BadVersion(version));
    }
    let count = cur.u32("record count")? as usize;
    let dim = cur.u32("dimension")? as usize;

    let mut records = Vec::with_capacity(count.min(bytes.len()));
    for i in 0..count {
        let id_len = cur.u16("id length")? as usize;
        let id = std::str::from_utf8(cur.take(id_len, "record id")?)
            .map_err(|e| Error::InvalidRecord(format!("record {i}: id is not UTF-8: {e}")))?
            .to_owned();
        let label_byte = cur.take(1, "label")?[0];
        let label = Label::from_index(label_byte as usize)
            .map_err(|_| Error::InvalidRecord(format!("record {id}: label byte {label_byte}")))?;
        let raw = cur.take(4 * dim, "values")?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        records.push(FeatureRecord {
            recording_id: id,
            label,
            values,
        });
    }
    if cur.pos != bytes.len() {
        return Err(Error::InvalidRecord(format!(
            "{} trailing bytes after {count} records",
            bytes.len() - cur.pos
        )));
    }
    Ok(records)
}

pub fn write_fvec(records: &[FeatureRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_fvec(records)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_fvec(path: impl AsRef<Path>) -> Result<Vec<FeatureRecord>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_fvec(&bytes)
}

struct Cursor<'b> {
    bytes: &'b [u8],
    pos: usize,
}

impl<'b> Cursor<'b> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'b [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Truncated(format!(
                "need {n} bytes for {what} at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            ))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}
