//! Binary checkpoint container.
//!
//! ```text
//! magic      8 bytes   "LFXCKPT\0"
//! version    u32 LE    1
//! manifest   u64 LE length + UTF-8 bytes (architecture hyperparameters, JSON)
//! count      u32 LE
//! per tensor:
//!   name     u32 LE length + UTF-8 bytes
//!   rank     u32 LE
//!   dims     rank × u64 LE
//!   values   product(dims) × f64 LE
//! ```

use std::io::{Read, Write};

use super::{NnError, Tensor};

const MAGIC: &[u8; 8] = b"LFXCKPT\0";
const VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(mut w: W, manifest: &str, tensors: &[(String, &Tensor)]) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(manifest.len() as u64).to_le_bytes())?;
    w.write_all(manifest.as_bytes())?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, t) in tensors {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(t.len() * 8);
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()
}

fn read_exact<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N], NnError> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|e| NnError::Checkpoint(format!("truncated file: {e}")))?;
    Ok(b)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, NnError> {
    Ok(u32::from_le_bytes(read_exact::<4, _>(r)?))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, NnError> {
    Ok(u64::from_le_bytes(read_exact::<8, _>(r)?))
}

fn read_string<R: Read>(r: &mut R, len: usize) -> Result<String, NnError> {
    let mut b = vec![0u8; len];
    r.read_exact(&mut b)
        .map_err(|e| NnError::Checkpoint(format!("truncated file: {e}")))?;
    String::from_utf8(b).map_err(|_| NnError::Checkpoint("invalid UTF-8".into()))
}

/// Returns the manifest string and the named tensors in file order.
pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(String, Vec<(String, Tensor)>), NnError> {
    if &read_exact::<8, _>(&mut r)? != MAGIC {
        return Err(NnError::Checkpoint("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(NnError::Checkpoint(format!("unsupported version {version}")));
    }
    let mlen = read_u64(&mut r)? as usize;
    let manifest = read_string(&mut r, mlen)?;
    let count = read_u32(&mut r)?;
    let mut tensors = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let nlen = read_u32(&mut r)? as usize;
        let name = read_string(&mut r, nlen)?;
        let rank = read_u32(&mut r)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u64(&mut r)? as usize);
        }
        let n: usize = shape.iter().product();
        let mut raw = vec![0u8; n * 8];
        r.read_exact(&mut raw)
            .map_err(|e| NnError::Checkpoint(format!("truncated tensor {name}: {e}")))?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let t = Tensor::new(shape, data).map_err(|e| NnError::Checkpoint(format!("tensor {name}: {e}")))?;
        tensors.push((name, t));
    }
    Ok((manifest, tensors))
}
