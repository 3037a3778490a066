//! Snapshot file formats.
//!
//! Binary layout (little-endian):
//!
//! | field   | type              |
//! |---------|-------------------|
//! | magic   | `b"ROMD"`         |
//! | version | `u32` (= 1)       |
//! | m       | `u64`             |
//! | n_h     | `u64`             |
//! | data    | `m * n_h` x `f64`, row-major |
//! | p       | `u64` (optional trailing parameter block) |
//! | params  | `m * p` x `f64`   |
//!
//! CSV: one snapshot per line, comma separated, no header.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Result, RomError};
use crate::snapshot::SnapshotSet;

pub const MAGIC: &[u8; 4] = b"ROMD";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode_binary(s: &SnapshotSet) -> Vec<u8> {
    let labels = s.labels();
    let extra = labels.map_or(0, |l| 8 + 8 * l.values.len());
    let mut out = Vec::with_capacity(24 + 8 * s.data().len() + extra);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(s.m() as u64).to_le_bytes());
    out.extend_from_slice(&(s.n_h() as u64).to_le_bytes());
    for x in s.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    if let Some(l) = labels {
        out.extend_from_slice(&(l.p as u64).to_le_bytes());
        for x in &l.values {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.malformed("truncated file"));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| self.malformed("size does not fit in memory"))
    }

    fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        let bytes = count
            .checked_mul(8)
            .ok_or_else(|| self.malformed("size overflow"))?;
        Ok(self
            .take(bytes)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn malformed(&self, reason: &str) -> RomError {
        RomError::Format {
            path: self.path.to_path_buf(),
            reason: reason.to_string(),
        }
    }
}

pub fn decode_binary(bytes: &[u8], path: &Path) -> Result<SnapshotSet> {
    let mut r = Reader {
        bytes,
        pos: 0,
        path,
    };
    if r.take(4)? != MAGIC {
        return Err(r.malformed("bad magic bytes"));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(r.malformed(&format!("unsupported format version {version}")));
    }
    let m = r.u64()?;
    let n_h = r.u64()?;
    let count = m
        .checked_mul(n_h)
        .ok_or_else(|| r.malformed("size overflow"))?;
    let data = r.f64s(count)?;
    let mut set = SnapshotSet::new(data, m, n_h)?;
    if r.remaining() > 0 {
        let p = r.u64()?;
        let count = m.checked_mul(p).ok_or_else(|| r.malformed("size overflow"))?;
        let values = r.f64s(count)?;
        set = set.with_labels(p, values)?;
    }
    if r.remaining() > 0 {
        return Err(r.malformed("trailing bytes after parameter block"));
    }
    Ok(set)
}

pub fn write_binary(path: &Path, s: &SnapshotSet) -> Result<()> {
    fs::write(path, encode_binary(s)).map_err(|e| RomError::io(path, e))
}

pub fn read_binary(path: &Path) -> Result<SnapshotSet> {
    let bytes = fs::read(path).map_err(|e| RomError::io(path, e))?;
    decode_binary(&bytes, path)
}

/// Rows of numbers as comma-separated lines. Uses the shortest
/// representation that round-trips exactly.
pub fn encode_csv_rows<'a>(rows: impl Iterator<Item = &'a [f64]>) -> String {
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

fn parse_csv_rows(text: &str, path: &Path) -> Result<Vec<Vec<f64>>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(lineno, line)| {
            line.split(',')
                .map(|field| {
                    field.trim().parse::<f64>().map_err(|e| RomError::Format {
                        path: path.to_path_buf(),
                        reason: format!("line {}: {e}: {field:?}", lineno + 1),
                    })
                })
                .collect()
        })
        .collect()
}

pub fn write_csv(path: &Path, s: &SnapshotSet) -> Result<()> {
    fs::write(path, encode_csv_rows(s.rows())).map_err(|e| RomError::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<SnapshotSet> {
    let text = fs::read_to_string(path).map_err(|e| RomError::io(path, e))?;
    let rows = parse_csv_rows(&text, path)?;
    if rows.is_empty() {
        return Err(RomError::Format {
            path: path.to_path_buf(),
            reason: "no snapshots".into(),
        });
    }
    SnapshotSet::from_rows(&rows)
}

/// Reads either format, detected by the magic bytes.
pub fn read_snapshots(path: &Path) -> Result<SnapshotSet> {
    let bytes = fs::read(path).map_err(|e| RomError::io(path, e))?;
    if bytes.starts_with(MAGIC) {
        decode_binary(&bytes, path)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| RomError::Format {
            path: path.to_path_buf(),
            reason: "neither binary snapshot file nor UTF-8 CSV".into(),
        })?;
        let rows = parse_csv_rows(&text, path)?;
        if rows.is_empty() {
            return Err(RomError::Format {
                path: path.to_path_buf(),
                reason: "no snapshots".into(),
            });
        }
        SnapshotSet::from_rows(&rows)
    }
}

/// Diagonal weight file: one decimal per line.
pub fn read_weights(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| RomError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(lineno, l)| {
            l.trim().parse::<f64>().map_err(|e| RomError::Format {
                path: path.to_path_buf(),
                reason: format!("line {}: {e}", lineno + 1),
            })
        })
        .collect()
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| RomError::io(path, e))?;
    f.write_all(text.as_bytes())
        .map_err(|e| RomError::io(path, e))
}
