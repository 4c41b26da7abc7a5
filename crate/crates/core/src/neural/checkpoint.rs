//! Binary network checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic      8 bytes  "EMVMLP\0\0"
//! version    u32      currently 1
//! activation u32      0 identity, 1 tanh, 2 relu (hidden layers)
//! n_dims     u32
//! dims       n_dims x u64
//! n_params   u64
//! params     n_params x f64, per layer: row-major (in, out) weights then bias
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::mlp::{Activation, MlpParams};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"EMVMLP\0\0";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode(params: &MlpParams) -> Vec<u8> {
    let dims = params.dims();
    let mut out = Vec::with_capacity(32 + 8 * (dims.len() + params.len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&params.activation().tag().to_le_bytes());
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for &x in params.as_slice() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

fn take<'a, R: Read>(r: &mut R, buf: &'a mut [u8]) -> Result<&'a [u8]> {
    r.read_exact(buf)
        .map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    take(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    take(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn decode(mut bytes: &[u8]) -> Result<MlpParams> {
    let r = &mut bytes;
    let mut magic = [0u8; 8];
    take(r, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let tag = read_u32(r)?;
    let activation = Activation::from_tag(tag)
        .ok_or_else(|| Error::Checkpoint(format!("unknown activation tag {tag}")))?;
    let n_dims = read_u32(r)? as usize;
    if !(2..=64).contains(&n_dims) {
        return Err(Error::Checkpoint(format!("implausible layer count {n_dims}")));
    }
    let dims = (0..n_dims)
        .map(|_| read_u64(r).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let n = read_u64(r)? as usize;
    let expected: usize = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    if n != expected {
        return Err(Error::Checkpoint(format!(
            "parameter count {n} does not match dims {dims:?}"
        )));
    }
    if r.len() != 8 * n {
        return Err(Error::Checkpoint(format!(
            "expected {} parameter bytes, found {}",
            8 * n,
            r.len()
        )));
    }
    let data = r
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    MlpParams::from_parts(&dims, activation, data)
}

pub fn save(params: &MlpParams, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode(params)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<MlpParams> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reload_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = MlpParams::actor(35, &[64, 64], 7, &mut rng).unwrap();
        let bytes = encode(&p);
        let q = decode(&bytes).unwrap();
        assert_eq!(q.dims(), p.dims());
        assert!(p.as_slice().iter().zip(q.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(encode(&q), bytes);
    }

    #[test]
    fn rejects_corruption() {
        let p = MlpParams::zeros(&[2, 3, 1], Activation::Tanh).unwrap();
        let mut bytes = encode(&p);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        bytes[0] = b'X';
        assert!(decode(&bytes).is_err());
    }
}
