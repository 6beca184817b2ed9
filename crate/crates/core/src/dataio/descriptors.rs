use std::collections::HashSet;
use std::path::Path;

use super::{read_bytes, unwritable, write_bytes, DataError};
use crate::pipeline::GlobalDescriptor;

pub const DESCRIPTOR_MAGIC: &[u8; 4] = b"GDSC";
/// Norm deviation above which a warning is logged on read.
const NORM_WARN_TOL: f64 = 1e-3;
/// Vectors whose norm is within this of 1 are kept bit-exact.
const NORM_KEEP_TOL: f64 = 1e-6;

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn error(&self, offset: usize, message: impl Into<String>) -> DataError {
        DataError::Decode {
            path: self.path.to_owned(),
            offset: offset as u64,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], DataError> {
        if self.bytes.len() - self.pos < n {
            return Err(self.error(self.pos, format!("truncated {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, DataError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u16(&mut self, what: &str) -> Result<u16, DataError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }
}

/// Reads a binary descriptor file.
///
/// Layout: magic `GDSC`, `u32` count, `u32` dim, then per record a `u16` id
/// length, the UTF-8 id and `dim` little-endian `f32` values. Vectors are
/// L2-normalized on read, with a warning when their norm differs from 1 by
/// more than 1e-3.
pub fn read_descriptors(path: &Path) -> Result<Vec<GlobalDescriptor>, DataError> {
    let bytes = read_bytes(path)?;
    let mut c = Cursor {
        path,
        bytes: &bytes,
        pos: 0,
    };
    if c.take(4, "magic")? != DESCRIPTOR_MAGIC {
        return Err(c.error(0, "bad magic, expected GDSC"));
    }
    let count = c.u32("count")? as usize;
    let dim = c.u32("dimension")? as usize;
    if dim == 0 && count > 0 {
        return Err(c.error(8, "zero dimension"));
    }
    let min_record = 2 + 4 * dim as u64;
    let available = (bytes.len() - c.pos) as u64;
    if count as u64 * min_record > available {
        return Err(c.error(
            4,
            format!("{count} records of dimension {dim} do not fit in {available} bytes"),
        ));
    }
    let mut out = Vec::with_capacity(count);
    let mut seen = HashSet::new();
    for _ in 0..count {
        let start = c.pos;
        let len = c.u16("id length")? as usize;
        let id = std::str::from_utf8(c.take(len, "id")?)
            .map_err(|_| c.error(start + 2, "id is not UTF-8"))?
            .to_owned();
        if !super::valid_id(&id) {
            return Err(c.error(start + 2, format!("invalid id '{id}'")));
        }
        if !seen.insert(id.clone()) {
            return Err(c.error(start, format!("duplicate id '{id}'")));
        }
        let raw = c.take(4 * dim, "vector")?;
        let mut v: Vec<f32> = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(c.error(start, format!("non-finite component in '{id}'")));
        }
        let norm = v.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(c.error(start, format!("zero-norm descriptor '{id}'")));
        }
        if (norm - 1.0).abs() > NORM_WARN_TOL {
            log::warn!(
                "{}: descriptor '{id}' has norm {norm}, normalizing",
                path.display()
            );
        }
        if (norm - 1.0).abs() > NORM_KEEP_TOL {
            for x in &mut v {
                *x = (*x as f64 / norm) as f32;
            }
        }
        out.push(GlobalDescriptor::new(id, v));
    }
    if c.pos != bytes.len() {
        return Err(c.error(c.pos, format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    Ok(out)
}

pub fn write_descriptors(descriptors: &[GlobalDescriptor], path: &Path) -> Result<(), DataError> {
    let dim = descriptors.first().map_or(0, |d| d.vector.len());
    let count = u32::try_from(descriptors.len()).map_err(|_| unwritable(path, "too many descriptors"))?;
    let mut out = Vec::with_capacity(12 + descriptors.len() * (2 + 4 * dim));
    out.extend_from_slice(DESCRIPTOR_MAGIC);
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for d in descriptors {
        if d.vector.len() != dim {
            return Err(unwritable(
                path,
                format!("'{}' has dimension {}, expected {dim}", d.id, d.vector.len()),
            ));
        }
        let id_len = u16::try_from(d.id.len()).map_err(|_| unwritable(path, "id longer than 65535 bytes"))?;
        out.extend_from_slice(&id_len.to_le_bytes());
        out.extend_from_slice(d.id.as_bytes());
        for x in &d.vector {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    write_bytes(path, &out)
}
