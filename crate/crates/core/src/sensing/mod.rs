//! Balanced ±1 sensing matrices and receiver-side compression.
//!
//! The receiver only ever adds or subtracts samples: matrices are kept as
//! signs and the `1/√m` factor is applied once, at recovery time.

pub mod packet;

pub use packet::{decode_stream, encode_stream, MeasurementPacket};

use rand::seq::SliceRandom;

use crate::error::{ensure_param, Result};
use crate::rng;
use crate::signal::SampledSignal;

/// `m × n` matrix with entries `±1/√m`, stored as signs (row-major).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensingMatrix {
    signs: Vec<i8>,
    m: usize,
    n: usize,
    seed: u64,
}

impl SensingMatrix {
    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The deferred scale factor `1/√m`.
    pub fn scale(&self) -> f64 {
        1.0 / (self.m as f64).sqrt()
    }

    pub fn row_signs(&self, r: usize) -> &[i8] {
        &self.signs[r * self.n..(r + 1) * self.n]
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// Scaled entry `±1/√m`.
    pub fn entry(&self, r: usize, c: usize) -> f64 {
        self.signs[r * self.n + c] as f64 * self.scale()
    }
}

/// Each row is an independent shuffle of `n/2` plus-ones and `n/2`
/// minus-ones, so every row sums to zero. For odd `n` the surplus entry is
/// `+1` on even rows and `-1` on odd rows.
pub fn gen_sensing_matrix(seed: u64, m: usize, n: usize) -> Result<SensingMatrix> {
    ensure_param!(m >= 1, "sensing matrix needs at least one row");
    ensure_param!(n >= 2, "sensing matrix needs at least two columns, got {n}");
    if n % 2 == 1 {
        log::warn!("odd sensing width {n}: rows carry one surplus entry and are not balanced");
    }
    let mut r = rng::from_seed(seed);
    let mut signs = Vec::with_capacity(m * n);
    let mut row = vec![0i8; n];
    for i in 0..m {
        let plus = if n.is_multiple_of(2) || i % 2 == 1 { n / 2 } else { n / 2 + 1 };
        for (c, v) in row.iter_mut().enumerate() {
            *v = if c < plus { 1 } else { -1 };
        }
        row.shuffle(&mut r);
        signs.extend_from_slice(&row);
    }
    Ok(SensingMatrix { signs, m, n, seed })
}

/// Unscaled projection `Φ̄ x` (sums and differences of samples). Multiply by
/// [`SensingMatrix::scale`] to obtain `Φ x`.
pub fn compress(x: &[f64], phi: &SensingMatrix) -> Result<Vec<f64>> {
    let mut macs = 0;
    compress_counted(x, phi, &mut macs)
}

/// [`compress`] that also adds the number of multiply-adds performed to `macs`.
pub fn compress_counted(x: &[f64], phi: &SensingMatrix, macs: &mut u64) -> Result<Vec<f64>> {
    ensure_param!(x.len() == phi.n, "signal has {} samples, matrix expects {}", x.len(), phi.n);
    let mut y = Vec::with_capacity(phi.m);
    for r in 0..phi.m {
        let acc = phi.row_signs(r).iter().zip(x).fold(0.0, |acc, (&s, &v)| acc + s as f64 * v);
        *macs += phi.n as u64;
        y.push(acc);
    }
    Ok(y)
}

/// Measurements per buffer, `round(alpha * n_tilde)`.
pub fn measurements_per_buffer(alpha: f64, n_tilde: usize) -> usize {
    (alpha * n_tilde as f64).round() as usize
}

/// Splits `x` into `b` equal buffers (zero-padding the tail when the length
/// does not divide) and compresses each with the same `m̃ × ñ` matrix.
pub fn compress_buffered(x: &SampledSignal, b: usize, alpha: f64, seed: u64) -> Result<Vec<MeasurementPacket>> {
    let mut macs = 0;
    compress_buffered_counted(x, b, alpha, seed, &mut macs)
}

pub fn compress_buffered_counted(
    x: &SampledSignal,
    b: usize,
    alpha: f64,
    seed: u64,
    macs: &mut u64,
) -> Result<Vec<MeasurementPacket>> {
    ensure_param!(alpha > 0.0 && alpha <= 1.0, "compression factor must lie in (0, 1], got {alpha}");
    ensure_param!(b >= 1 && b <= u16::MAX as usize, "buffer count {b} out of range");
    let n_tilde = x.len().div_ceil(b);
    let alpha32 = alpha as f32;
    let m_tilde = measurements_per_buffer(alpha32 as f64, n_tilde);
    ensure_param!(m_tilde >= 1, "alpha {alpha} leaves no measurements for {n_tilde}-sample buffers");
    ensure_param!(x.fs().fract() == 0.0 && x.fs() <= u32::MAX as f64, "sample rate must be integral Hz");
    let padded = x.zero_padded(n_tilde * b)?;
    let phi = gen_sensing_matrix(seed, m_tilde, n_tilde)?;

    padded
        .samples()
        .chunks_exact(n_tilde)
        .enumerate()
        .map(|(i, buf)| {
            let y = compress_counted(buf, &phi, macs)?;
            Ok(MeasurementPacket {
                buffer_index: i as u16,
                buffer_count: b as u16,
                n_tilde: n_tilde as u32,
                fs_hz: x.fs() as u32,
                alpha: alpha32,
                seed,
                y_tilde: y.into_iter().map(|v| v as f32).collect(),
            })
        })
        .collect()
}

/// Buffer count that makes each buffer as long as the reference chirp:
/// `ceil(n_a / round(t_p * fs))`.
pub fn choose_buffer_count(t_p: f64, fs: f64, n_a: usize) -> Result<usize> {
    let n_p = (t_p * fs).round();
    ensure_param!(n_p >= 1.0, "reference must span at least one sample");
    buffer_count_for(n_p as usize, n_a)
}

pub fn buffer_count_for(n_p: usize, n_a: usize) -> Result<usize> {
    ensure_param!(n_p >= 1, "reference must span at least one sample");
    ensure_param!(n_a >= n_p, "trace of {n_a} samples is shorter than the {n_p}-sample reference");
    Ok(n_a.div_ceil(n_p))
}

/// Rule-of-thumb sufficiency check `m >= 2 k ln(d / m)`.
pub fn measurement_bound(k: usize, d: usize, m: usize) -> Result<bool> {
    ensure_param!(k >= 1, "sparsity must be at least 1");
    ensure_param!(m >= 1 && d > m, "need d > m >= 1, got d = {d}, m = {m}");
    Ok(m as f64 >= 2.0 * k as f64 * (d as f64 / m as f64).ln())
}
