//! Signal files.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "SXS1"
//!      4     1  version (1)
//!      5     3  reserved, zero
//!      8     4  sample rate, Hz (u32)
//!     12     4  sample count (u32)
//!     16   4*n  samples (f32)
//! ```
//!
//! The CSV form holds one decimal sample per line and carries no sample rate.

use std::io::{BufRead, Write};

use super::SampledSignal;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SXS1";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 16;

pub fn encode(signal: &SampledSignal) -> Result<Vec<u8>> {
    let fs = signal.fs();
    if fs.fract() != 0.0 || fs > u32::MAX as f64 {
        return Err(Error::Parameter(format!("sample rate {fs} is not representable as integer Hz")));
    }
    let n = u32::try_from(signal.len()).map_err(|_| Error::Parameter("signal too long".into()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * signal.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&[0; 3]);
    out.extend_from_slice(&(fs as u32).to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    for &v in signal.samples() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<SampledSignal> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("signal header truncated ({} bytes)", bytes.len())));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Format("bad signal magic".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::Format(format!("unsupported signal version {}", bytes[4])));
    }
    let fs = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let n = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() != 4 * n {
        return Err(Error::Format(format!("expected {} sample bytes, found {}", 4 * n, body.len())));
    }
    let samples = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
    SampledSignal::new(samples, fs as f64).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_csv<W: Write>(signal: &SampledSignal, mut w: W) -> Result<()> {
    for v in signal.samples() {
        writeln!(w, "{v}")?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(r: R, fs: f64) -> Result<SampledSignal> {
    let mut samples = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v = t.parse::<f64>().map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?;
        samples.push(v);
    }
    SampledSignal::new(samples, fs).map_err(|e| Error::Format(e.to_string()))
}
