//! Binary parameter files.
//!
//! Layout, all little endian: the magic `PXRCKPT\0`, a `u32` format
//! version, the `u64` network spec hash, the `u64` parameter count, then the
//! parameters as `f32`.

use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"PXRCKPT\0";
pub const VERSION: u32 = 1;
const HEADER: usize = 8 + 4 + 8 + 8;

pub fn encode_checkpoint(spec_hash: u64, params: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + 4 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&spec_hash.to_le_bytes());
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

/// Parses a checkpoint and checks it against the expected spec hash.
pub fn decode_checkpoint(bytes: &[u8], spec_hash: u64) -> Result<Vec<f32>> {
    let corrupt = |why: &str| Error::CorruptCheckpoint(why.into());
    if bytes.len() < HEADER {
        return Err(corrupt("file shorter than the header"));
    }
    if &bytes[..8] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(corrupt(&format!("unsupported version {version}")));
    }
    let found = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
    if found != spec_hash {
        return Err(Error::SpecMismatch { expected: spec_hash, found });
    }
    let count = u64::from_le_bytes(bytes[20..28].try_into().expect("8 bytes"));
    let body = &bytes[HEADER..];
    if count.checked_mul(4) != Some(body.len() as u64) {
        return Err(corrupt(&format!("expected {count} parameters, body holds {} bytes", body.len())));
    }
    Ok(body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
}

pub fn save_checkpoint(path: impl AsRef<Path>, spec_hash: u64, params: &[f32]) -> Result<()> {
    std::fs::write(path, encode_checkpoint(spec_hash, params))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>, spec_hash: u64) -> Result<Vec<f32>> {
    decode_checkpoint(&std::fs::read(path)?, spec_hash)
}
