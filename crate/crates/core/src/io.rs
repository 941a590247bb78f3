//! `BDRT` binary tensor files.
//!
//! ```text
//! offset  size      field
//! 0       4         magic b"BDRT"
//! 4       2         version, u16 LE, = 1
//! 6       2         rank, u16 LE
//! 8       8·rank    dims, u64 LE each
//! ...     4·Π dims  payload, f32 LE, row-major
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: [u8; 4] = *b"BDRT";
pub const VERSION: u16 = 1;

/// Serializes `t`, rounding every value to `f32`. Values outside the `f32`
/// range are rejected.
pub fn write_tensor<W: Write>(mut w: W, t: &Tensor) -> Result<()> {
    let rank = u16::try_from(t.shape.len())
        .map_err(|_| Error::MalformedTensor(format!("rank {} exceeds u16", t.shape.len())))?;
    let mut buf = Vec::with_capacity(8 + 8 * t.shape.len() + 4 * t.len());
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&rank.to_le_bytes());
    for &d in &t.shape {
        buf.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for (index, &v) in t.data.iter().enumerate() {
        let f = v as f32;
        if !f.is_finite() {
            return Err(Error::MalformedTensor(format!("value {v} at index {index} does not fit f32")));
        }
        buf.extend_from_slice(&f.to_le_bytes());
    }
    w.write_all(&buf)
        .map_err(|e| Error::MalformedTensor(format!("write failed: {e}")))
}

pub fn read_tensor<R: Read>(mut r: R) -> Result<Tensor> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| Error::MalformedTensor(format!("read failed: {e}")))?;
    parse_tensor(&bytes)
}

fn parse_tensor(bytes: &[u8]) -> Result<Tensor> {
    let bad = |msg: String| Error::MalformedTensor(msg);
    if bytes.len() < 8 || bytes[..4] != MAGIC {
        return Err(bad("missing BDRT magic".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let rank = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    let header = 8 + 8 * rank;
    if bytes.len() < header {
        return Err(bad(format!("truncated header for rank {rank}")));
    }
    let shape: Vec<usize> = bytes[8..header]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")) as usize)
        .collect();
    let n = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| bad(format!("shape {shape:?} overflows")))?;
    if bytes.len() - header != n {
        return Err(bad(format!(
            "payload is {} bytes, shape {shape:?} needs {n}",
            bytes.len() - header
        )));
    }
    let data = bytes[header..]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
        .collect();
    Tensor::new(shape, data)
}

pub fn load_tensor(path: &Path) -> Result<Tensor> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_tensor(&bytes)
}

pub fn save_tensor(path: &Path, t: &Tensor) -> Result<()> {
    let mut buf = Vec::new();
    write_tensor(&mut buf, t)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}
