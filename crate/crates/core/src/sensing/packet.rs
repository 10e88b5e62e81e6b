//! Measurement packet wire format.
//!
//! All fields little-endian:
//!
//! ```text
//! offset  size    field
//!      0     4    magic "SXC1"
//!      4     1    version (1)
//!      5     2    buffer_index (u16)
//!      7     2    buffer_count (u16)
//!      9     4    n_tilde (u32)
//!     13     4    m_tilde (u32)
//!     17     4    fs_hz (u32)
//!     21     4    alpha (f32)
//!     25     8    seed (u64)
//!     33  4*m̃     y_tilde (f32)
//! ```

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SXC1";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 33;

/// One compressed buffer. `y_tilde` holds the unscaled projection `Φ̄ x̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementPacket {
    pub buffer_index: u16,
    pub buffer_count: u16,
    pub n_tilde: u32,
    pub fs_hz: u32,
    pub alpha: f32,
    pub seed: u64,
    pub y_tilde: Vec<f32>,
}

impl MeasurementPacket {
    pub fn m_tilde(&self) -> usize {
        self.y_tilde.len()
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + 4 * self.y_tilde.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Format(msg));
        if self.buffer_count == 0 || self.buffer_index >= self.buffer_count {
            return bad(format!("buffer index {} outside count {}", self.buffer_index, self.buffer_count));
        }
        if self.n_tilde == 0 || self.y_tilde.is_empty() || self.y_tilde.len() > self.n_tilde as usize {
            return bad(format!("invalid shape: {} measurements of {} samples", self.y_tilde.len(), self.n_tilde));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) || self.fs_hz == 0 {
            return bad(format!("invalid alpha {} or sample rate {}", self.alpha, self.fs_hz));
        }
        if self.y_tilde.iter().any(|v| !v.is_finite()) {
            return bad("non-finite measurement".into());
        }
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.encode_into(&mut out);
        out
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&self.buffer_index.to_le_bytes());
        out.extend_from_slice(&self.buffer_count.to_le_bytes());
        out.extend_from_slice(&self.n_tilde.to_le_bytes());
        out.extend_from_slice(&(self.y_tilde.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.fs_hz.to_le_bytes());
        out.extend_from_slice(&self.alpha.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for v in &self.y_tilde {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }

    /// Decodes one packet from the front of `bytes`, returning it and the
    /// number of bytes consumed.
    pub fn decode_prefix(bytes: &[u8]) -> Result<(Self, usize)> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!("packet header truncated ({} bytes)", bytes.len())));
        }
        if &bytes[0..4] != MAGIC {
            return Err(Error::Format("bad packet magic".into()));
        }
        if bytes[4] != VERSION {
            return Err(Error::Format(format!("unsupported packet version {}", bytes[4])));
        }
        let u16_at = |o: usize| u16::from_le_bytes(bytes[o..o + 2].try_into().unwrap());
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let m = u32_at(13) as usize;
        let total = HEADER_LEN + 4 * m;
        if bytes.len() < total {
            return Err(Error::Format(format!("packet body truncated: need {total} bytes, have {}", bytes.len())));
        }
        let packet = MeasurementPacket {
            buffer_index: u16_at(5),
            buffer_count: u16_at(7),
            n_tilde: u32_at(9),
            fs_hz: u32_at(17),
            alpha: f32::from_le_bytes(bytes[21..25].try_into().unwrap()),
            seed: u64::from_le_bytes(bytes[25..33].try_into().unwrap()),
            y_tilde: bytes[HEADER_LEN..total]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        };
        packet.validate()?;
        Ok((packet, total))
    }

    /// Decodes exactly one packet; trailing bytes are an error.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let (p, used) = Self::decode_prefix(bytes)?;
        if used != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes after packet", bytes.len() - used)));
        }
        Ok(p)
    }
}

pub fn encode_stream(packets: &[MeasurementPacket]) -> Vec<u8> {
    let mut out = Vec::with_capacity(packets.iter().map(|p| p.encoded_len()).sum());
    for p in packets {
        p.encode_into(&mut out);
    }
    out
}

pub fn decode_stream(mut bytes: &[u8]) -> Result<Vec<MeasurementPacket>> {
    let mut packets = Vec::new();
    while !bytes.is_empty() {
        let (p, used) = MeasurementPacket::decode_prefix(bytes)?;
        packets.push(p);
        bytes = &bytes[used..];
    }
    Ok(packets)
}
