//! Binary dump of a received beacon.
//!
//! Layout, all little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 4     | magic `BATR` |
//! | 2     | format version (1) |
//! | 1     | probing mode, 0 conventional, 1 randomized |
//! | 1     | reserved, zero |
//! | 6×4   | slots, streams, per-stream tones, chains, symbols, subslot-0 length |
//! | n×4   | used subcarriers, stream-major |
//! | m×8   | samples as interleaved `f32` real/imaginary pairs |
//!
//! Samples are stored in single precision, so a round trip is exact only up
//! to `f32` rounding.

use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::{BeaconDims, BeaconRx, ProbingMode};

pub const MAGIC: &[u8; 4] = b"BATR";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 1 + 1 + 6 * 4;
/// Decoder refuses traces with more samples than this.
pub const MAX_SAMPLES: usize = 1 << 28;

pub fn encode<W: Write>(rx: &BeaconRx, mut out: W) -> Result<()> {
    let d = &rx.dims;
    let fields = [d.slots, d.streams, d.per_stream, d.chains, d.symbols, d.subslot0];
    let as_u32 = |v: usize| u32::try_from(v).map_err(|_| Error::Trace(format!("value {v} does not fit in u32")));
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&[mode_byte(rx.mode), 0])?;
    for f in fields {
        out.write_all(&as_u32(f)?.to_le_bytes())?;
    }
    for &k in rx.subcarriers.iter().flatten() {
        out.write_all(&as_u32(k)?.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(rx.samples.len() * 8);
    for s in &rx.samples {
        buf.extend_from_slice(&(s.re as f32).to_le_bytes());
        buf.extend_from_slice(&(s.im as f32).to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn to_bytes(rx: &BeaconRx) -> Result<Vec<u8>> {
    let mut v = Vec::new();
    encode(rx, &mut v)?;
    Ok(v)
}

fn mode_byte(mode: ProbingMode) -> u8 {
    match mode {
        ProbingMode::Conventional => 0,
        ProbingMode::Randomized => 1,
    }
}

fn u32_at(bytes: &[u8], pos: usize) -> usize {
    u32::from_le_bytes([bytes[pos], bytes[pos + 1], bytes[pos + 2], bytes[pos + 3]]) as usize
}

fn f32_at(bytes: &[u8], pos: usize) -> f32 {
    f32::from_le_bytes([bytes[pos], bytes[pos + 1], bytes[pos + 2], bytes[pos + 3]])
}

/// Parses and validates a trace. Never panics on malformed input.
pub fn decode(bytes: &[u8]) -> Result<BeaconRx> {
    let bad = |m: &str| Error::Trace(m.to_string());
    if bytes.len() < HEADER_LEN {
        return Err(bad("truncated header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::Trace(format!("unsupported version {version}")));
    }
    let mode = match bytes[6] {
        0 => ProbingMode::Conventional,
        1 => ProbingMode::Randomized,
        b => return Err(Error::Trace(format!("unknown probing mode {b}"))),
    };
    if bytes[7] != 0 {
        return Err(bad("reserved byte set"));
    }
    let f: Vec<usize> = (0..6).map(|i| u32_at(bytes, 8 + 4 * i)).collect();
    let dims = BeaconDims {
        slots: f[0],
        streams: f[1],
        per_stream: f[2],
        chains: f[3],
        symbols: f[4],
        subslot0: f[5],
    };
    dims.validate().map_err(|e| Error::Trace(e.to_string()))?;

    let overflow = || bad("dimensions overflow");
    let n_sub = dims.streams.checked_mul(dims.per_stream).ok_or_else(overflow)?;
    let n_samples = [dims.slots, n_sub, dims.chains, dims.symbols]
        .iter()
        .try_fold(1usize, |acc, &v| acc.checked_mul(v))
        .ok_or_else(overflow)?;
    if n_samples > MAX_SAMPLES {
        return Err(bad("too many samples"));
    }
    let expected = n_sub
        .checked_mul(4)
        .and_then(|a| n_samples.checked_mul(8).and_then(|b| a.checked_add(b)))
        .and_then(|p| p.checked_add(HEADER_LEN))
        .ok_or_else(overflow)?;
    if bytes.len() != expected {
        return Err(Error::Trace(format!("expected {expected} bytes, found {}", bytes.len())));
    }

    let mut pos = HEADER_LEN;
    let mut subcarriers = Vec::with_capacity(dims.streams);
    for _ in 0..dims.streams {
        let set: Vec<usize> = (0..dims.per_stream).map(|l| u32_at(bytes, pos + 4 * l)).collect();
        pos += 4 * dims.per_stream;
        subcarriers.push(set);
    }
    let mut samples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let (re, im) = (f32_at(bytes, pos), f32_at(bytes, pos + 4));
        if !re.is_finite() || !im.is_finite() {
            return Err(Error::NonFinite("trace sample"));
        }
        samples.push(Complex64::new(re as f64, im as f64));
        pos += 8;
    }
    BeaconRx::new(dims, mode, subcarriers, samples)
}
