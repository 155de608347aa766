//! Binary field frames: three little-endian `u32` (value count, nx, nr) then
//! `nx * nr` little-endian `f32` in grid node order (`ix * nr + jr`).

use anyhow::{bail, ensure};

pub const HEADER_BYTES: usize = 12;

pub fn encode_frame(nx: usize, nr: usize, values: &[f64]) -> Vec<u8> {
    assert_eq!(values.len(), nx * nr, "frame shape");
    let mut out = Vec::with_capacity(HEADER_BYTES + 4 * values.len());
    for v in [values.len(), nx, nr] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub nx: usize,
    pub nr: usize,
    pub values: Vec<f32>,
}

pub fn decode_frame(bytes: &[u8]) -> anyhow::Result<Frame> {
    if bytes.len() < HEADER_BYTES {
        bail!("frame shorter than its header");
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().expect("four bytes")) as usize;
    let (n, nx, nr) = (word(0), word(1), word(2));
    ensure!(n == nx * nr, "frame count {n} is not {nx} x {nr}");
    ensure!(bytes.len() == HEADER_BYTES + 4 * n, "frame has {} bytes for {n} values", bytes.len());
    let values = bytes[HEADER_BYTES..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("four bytes")))
        .collect();
    Ok(Frame { nx, nr, values })
}
