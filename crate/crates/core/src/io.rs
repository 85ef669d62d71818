//! Binary file formats.
//!
//! Kernel and similarity dumps:
//!
//! ```text
//! offset 0  magic   b"D2IK"
//! offset 4  version u8 (= 1)
//! offset 5  m       u24 little-endian
//! offset 8  m*m     f64 little-endian, row-major
//! ```
//!
//! Feature files:
//!
//! ```text
//! offset 0   magic   b"D2IF"
//! offset 4   version u32 LE (= 1)
//! offset 8   n       u32 LE
//! offset 12  d       u32 LE
//! offset 16  n*d     f32 LE, row-major
//! ```

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;

pub const MATRIX_MAGIC: &[u8; 4] = b"D2IK";
pub const MATRIX_VERSION: u8 = 1;
pub const FEATURE_MAGIC: &[u8; 4] = b"D2IF";
pub const FEATURE_VERSION: u32 = 1;

const MAX_U24: usize = (1 << 24) - 1;

pub fn encode_matrix(m: &SquareMatrix) -> Result<Vec<u8>> {
    let n = m.dim();
    if n > MAX_U24 {
        return Err(Error::Shape(format!(
            "matrix dimension {n} does not fit in 24 bits"
        )));
    }
    let mut out = Vec::with_capacity(8 + n * n * 8);
    out.extend_from_slice(MATRIX_MAGIC);
    out.push(MATRIX_VERSION);
    out.extend_from_slice(&(n as u32).to_le_bytes()[..3]);
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_matrix(bytes: &[u8], source: &Path) -> Result<SquareMatrix> {
    if bytes.len() < 8 {
        return Err(Error::format(
            source,
            bytes.len() as u64,
            "truncated matrix header",
        ));
    }
    if &bytes[..4] != MATRIX_MAGIC {
        return Err(Error::format(source, 0, "bad magic, expected D2IK"));
    }
    if bytes[4] != MATRIX_VERSION {
        return Err(Error::format(
            source,
            4,
            format!("unsupported version {}", bytes[4]),
        ));
    }
    let n = u32::from_le_bytes([bytes[5], bytes[6], bytes[7], 0]) as usize;
    let expected = 8 + n * n * 8;
    if bytes.len() != expected {
        return Err(Error::format(
            source,
            bytes.len().min(expected) as u64,
            format!(
                "{n}x{n} matrix needs {expected} bytes, file has {}",
                bytes.len()
            ),
        ));
    }
    let data = bytes[8..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(SquareMatrix::from_row_major(n, data))
}

pub fn write_matrix(path: &Path, m: &SquareMatrix) -> Result<()> {
    write_atomic(path, &encode_matrix(m)?)
}

pub fn read_matrix(path: &Path) -> Result<SquareMatrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_matrix(&bytes, path)
}

/// Row-major `n x d` feature block, held at 64-bit precision in memory.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureBlock {
    pub n: usize,
    pub d: usize,
    pub data: Vec<f64>,
}

impl FeatureBlock {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }
}

pub fn encode_features(rows: &[Vec<f64>], d: usize) -> Result<Vec<u8>> {
    let n = rows.len();
    if n > u32::MAX as usize || d > u32::MAX as usize {
        return Err(Error::Shape("feature block too large".into()));
    }
    let mut out = Vec::with_capacity(16 + n * d * 4);
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    for (i, r) in rows.iter().enumerate() {
        if r.len() != d {
            return Err(Error::Shape(format!(
                "feature row {i} has length {}, expected {d}",
                r.len()
            )));
        }
        for &v in r {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_features(bytes: &[u8], source: &Path) -> Result<FeatureBlock> {
    if bytes.len() < 16 {
        return Err(Error::format(
            source,
            bytes.len() as u64,
            "truncated feature header",
        ));
    }
    if &bytes[..4] != FEATURE_MAGIC {
        return Err(Error::format(source, 0, "bad magic, expected D2IF"));
    }
    let word = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = word(4);
    if version != FEATURE_VERSION {
        return Err(Error::format(
            source,
            4,
            format!("unsupported version {version}"),
        ));
    }
    let (n, d) = (word(8) as usize, word(12) as usize);
    let expected = 16 + n * d * 4;
    if bytes.len() < expected {
        // Offset of the first missing whole value.
        let avail = (bytes.len() - 16) / 4 * 4 + 16;
        return Err(Error::format(
            source,
            avail as u64,
            format!(
                "truncated: {n}x{d} features need {expected} bytes, file has {}",
                bytes.len()
            ),
        ));
    }
    if bytes.len() > expected {
        return Err(Error::format(
            source,
            expected as u64,
            format!(
                "{} trailing bytes after {n}x{d} features",
                bytes.len() - expected
            ),
        ));
    }
    let data = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok(FeatureBlock { n, d, data })
}

pub fn write_features(path: &Path, rows: &[Vec<f64>], d: usize) -> Result<()> {
    write_atomic(path, &encode_features(rows, d)?)
}

pub fn read_features(path: &Path) -> Result<FeatureBlock> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_features(&bytes, path)
}

/// Writes to a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
