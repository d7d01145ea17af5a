//! BINQ container, version 1. All integers little-endian, all reals IEEE-754
//! binary64 little-endian.
//!
//! ```text
//! magic        4   "BINQ"
//! version      u16 1
//! d            u32 components per sample
//! n            u64 samples
//! n_stages     u32
//! n_q_total    u32 sum of stage widths
//! means        f64 × d
//! scales       f64 × d
//! per stage:
//!   n_q        u32
//!   has_bound  u8  0 or 1
//!   bound      f64 (0.0 when has_bound = 0)
//!   phi        f64 × d·n_q, row-major (component-major)
//! codes        n × ceil(n_q_total/8) bytes, LSB-first, rows byte aligned
//! n_bc         u64
//! bc_indices   u64 × n_bc, strictly increasing
//! bc_samples   f64 × n_bc·d, row-major, original units
//! ```

use std::io::{self, Read, Write};

use nalgebra::DMatrix;
use thiserror::Error;

use super::{CompressedDataset, Standardization};
use crate::codes::{row_bytes, CodeMatrix};
use crate::encoder::Dictionary;

pub const MAGIC: [u8; 4] = *b"BINQ";
pub const VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic {0:02x?}, not a BINQ file")]
    BadMagic([u8; 4]),
    #[error("unsupported BINQ version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated at byte {offset}: needed {needed} more bytes")]
    Truncated { offset: usize, needed: usize },
    #[error("invalid content at byte {offset}: {reason}")]
    Invalid { offset: usize, reason: String },
    #[error("{len} trailing bytes after end of data")]
    TrailingBytes { len: usize },
    #[error("I/O error at byte {position}: {source}")]
    Io { position: u64, source: io::Error },
}

pub(super) fn encoded_len(ds: &CompressedDataset) -> usize {
    let d = ds.d();
    let header = 4 + 2 + 4 + 8 + 4 + 4 + 16 * d;
    let stages: usize = ds.stages().iter().map(|s| 4 + 1 + 8 + 8 * d * s.n_q()).sum();
    let codes = ds.n() * row_bytes(ds.n_q_total());
    let bc = 8 + ds.bc_indices().len() * (8 + 8 * d);
    header + stages + codes + bc
}

pub fn write_bytes(ds: &CompressedDataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(encoded_len(ds));
    let d = ds.d();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&(ds.n() as u64).to_le_bytes());
    out.extend_from_slice(&(ds.stages().len() as u32).to_le_bytes());
    out.extend_from_slice(&(ds.n_q_total() as u32).to_le_bytes());
    let st = ds.standardization();
    for v in st.means.iter().chain(&st.scales) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for stage in ds.stages() {
        out.extend_from_slice(&(stage.n_q() as u32).to_le_bytes());
        out.push(u8::from(stage.element_bound().is_some()));
        out.extend_from_slice(&stage.element_bound().unwrap_or(0.0).to_le_bytes());
        for i in 0..d {
            for j in 0..stage.n_q() {
                out.extend_from_slice(&stage.phi()[(i, j)].to_le_bytes());
            }
        }
    }
    out.extend_from_slice(ds.codes().as_bytes());
    out.extend_from_slice(&(ds.bc_indices().len() as u64).to_le_bytes());
    for &k in ds.bc_indices() {
        out.extend_from_slice(&(k as u64).to_le_bytes());
    }
    for r in 0..ds.bc_samples().nrows() {
        for i in 0..d {
            out.extend_from_slice(&ds.bc_samples()[(r, i)].to_le_bytes());
        }
    }
    debug_assert_eq!(out.len(), encoded_len(ds));
    out
}

struct Counting<W> {
    inner: W,
    written: u64,
}

impl<W: Write> Write for Counting<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.written += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

/// Write the encoded dataset; returns the number of bytes written. Sink
/// errors carry the offset of the first byte that was not accepted.
pub fn write<W: Write>(ds: &CompressedDataset, sink: W) -> Result<u64, FormatError> {
    let bytes = write_bytes(ds);
    let mut sink = Counting {
        inner: sink,
        written: 0,
    };
    sink.write_all(&bytes)
        .and_then(|()| sink.flush())
        .map_err(|source| FormatError::Io {
            position: sink.written,
            source,
        })?;
    Ok(sink.written)
}

pub fn read<R: Read>(mut source: R) -> Result<CompressedDataset, FormatError> {
    let mut bytes = Vec::new();
    source
        .read_to_end(&mut bytes)
        .map_err(|e| FormatError::Io {
            position: bytes.len() as u64,
            source: e,
        })?;
    read_bytes(&bytes)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8], FormatError> {
        let remaining = self.bytes.len() - self.pos;
        if len > remaining {
            return Err(FormatError::Truncated {
                offset: self.pos,
                needed: len - remaining,
            });
        }
        let s = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<usize, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self) -> Result<usize, FormatError> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| self.invalid(8, format!("count {v} does not fit in memory")))
    }

    fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, count: usize) -> Result<Vec<f64>, FormatError> {
        let len = count
            .checked_mul(8)
            .ok_or_else(|| self.invalid(0, "length overflow"))?;
        Ok(self
            .take(len)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    /// Error pointing `back` bytes before the current position.
    fn invalid(&self, back: usize, reason: impl Into<String>) -> FormatError {
        FormatError::Invalid {
            offset: self.pos.saturating_sub(back),
            reason: reason.into(),
        }
    }
}

pub fn read_bytes(bytes: &[u8]) -> Result<CompressedDataset, FormatError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic: [u8; 4] = cur.take(4)?.try_into().unwrap();
    if magic != MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    let version = cur.u16()?;
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let d = cur.u32()?;
    if d == 0 {
        return Err(cur.invalid(4, "d must be >= 1"));
    }
    let n = cur.u64()?;
    let n_stages = cur.u32()?;
    if n_stages == 0 {
        return Err(cur.invalid(4, "at least one stage required"));
    }
    let n_q_total = cur.u32()?;
    let means = cur.f64s(d)?;
    let scales_at = cur.pos;
    let scales = cur.f64s(d)?;
    if scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) || means.iter().any(|m| !m.is_finite()) {
        return Err(FormatError::Invalid {
            offset: scales_at,
            reason: "scales must be positive and means finite".into(),
        });
    }

    let mut stages = Vec::with_capacity(n_stages.min(1024));
    let mut width_sum = 0usize;
    for _ in 0..n_stages {
        let n_q = cur.u32()?;
        if n_q == 0 {
            return Err(cur.invalid(4, "stage width must be >= 1"));
        }
        width_sum = width_sum.saturating_add(n_q);
        let has_bound = cur.u8()?;
        let bound = cur.f64()?;
        let bound = match has_bound {
            0 => None,
            1 => Some(bound),
            other => return Err(cur.invalid(9, format!("has_bound flag {other}"))),
        };
        let at = cur.pos;
        let values = cur.f64s(d.saturating_mul(n_q))?;
        let phi = DMatrix::from_row_slice(d, n_q, &values);
        let dict = Dictionary::new(phi, bound).map_err(|e| FormatError::Invalid {
            offset: at,
            reason: e.to_string(),
        })?;
        stages.push(dict);
    }
    if width_sum != n_q_total {
        return Err(FormatError::Invalid {
            offset: 22,
            reason: format!("n_q_total {n_q_total} != sum of stage widths {width_sum}"),
        });
    }

    let codes_at = cur.pos;
    let code_len = n
        .checked_mul(row_bytes(n_q_total))
        .ok_or_else(|| cur.invalid(0, "code region size overflow"))?;
    let code_bytes = cur.take(code_len)?.to_vec();
    let codes = CodeMatrix::from_bytes(n, n_q_total, code_bytes).map_err(|e| {
        FormatError::Invalid {
            offset: codes_at,
            reason: e.to_string(),
        }
    })?;

    let n_bc = cur.u64()?;
    let idx_at = cur.pos;
    let idx_len = n_bc
        .checked_mul(8)
        .ok_or_else(|| cur.invalid(8, "bc count overflow"))?;
    let bc_indices: Vec<usize> = cur
        .take(idx_len)?
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let samples = cur.f64s(n_bc.saturating_mul(d))?;
    if cur.pos != bytes.len() {
        return Err(FormatError::TrailingBytes {
            len: bytes.len() - cur.pos,
        });
    }
    let bc_samples = DMatrix::from_row_slice(n_bc, d, &samples);

    CompressedDataset::new(
        Standardization { means, scales },
        stages,
        codes,
        bc_indices,
        bc_samples,
    )
    .map_err(|e| FormatError::Invalid {
        offset: idx_at,
        reason: e.to_string(),
    })
}
