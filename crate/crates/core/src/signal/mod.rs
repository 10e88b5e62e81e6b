//! Reference chirps, sampled signals and the synthetic acoustic channel.

mod channel;
pub mod file;

pub use channel::{simulate_channel, simulate_channel_samples, ChannelPreset, ChannelProfile, Path};

use std::f64::consts::PI;

use crate::error::{ensure_param, Error, Result};

/// Linear frequency sweep description.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChirpSpec {
    pub f_start: f64,
    pub f_end: f64,
    /// Sweep duration in seconds.
    pub duration: f64,
    /// Sample rate in Hz.
    pub fs: f64,
}

impl ChirpSpec {
    pub fn new(f_start: f64, f_end: f64, duration: f64, fs: f64) -> Result<Self> {
        let spec = ChirpSpec { f_start, f_end, duration, fs };
        spec.validate()?;
        Ok(spec)
    }

    /// 1-20 kHz over 10 ms at 48 kHz: the bench-top reference.
    pub fn wideband() -> Self {
        ChirpSpec { f_start: 1_000.0, f_end: 20_000.0, duration: 0.01, fs: 48_000.0 }
    }

    /// 3-7 kHz over 10 ms at 15 kHz: the low-rate mote reference.
    pub fn mote() -> Self {
        ChirpSpec { f_start: 3_000.0, f_end: 7_000.0, duration: 0.01, fs: 15_000.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.f_start, self.f_end, self.duration, self.fs].iter().all(|v| v.is_finite());
        ensure_param!(all_finite, "chirp parameters must be finite");
        ensure_param!(self.f_start > 0.0 && self.f_end > 0.0, "chirp frequencies must be positive");
        ensure_param!(self.duration > 0.0, "chirp duration must be positive");
        ensure_param!(
            self.fs > 2.0 * self.f_start.max(self.f_end),
            "sample rate {} Hz violates Nyquist for a sweep up to {} Hz",
            self.fs,
            self.f_start.max(self.f_end)
        );
        ensure_param!(self.len() >= 2, "chirp must span at least two samples");
        Ok(())
    }

    /// Number of samples, `round(duration * fs)`.
    pub fn len(&self) -> usize {
        (self.duration * self.fs).round() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Finite real-valued sample vector tagged with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    samples: Vec<f64>,
    fs: f64,
}

impl SampledSignal {
    pub fn new(samples: Vec<f64>, fs: f64) -> Result<Self> {
        ensure_param!(!samples.is_empty(), "signal must contain at least one sample");
        ensure_param!(fs.is_finite() && fs > 0.0, "sample rate must be positive, got {fs}");
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!("sample {i} is not finite")));
        }
        Ok(SampledSignal { samples, fs })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    pub fn peak_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean_abs(&self) -> f64 {
        self.samples.iter().map(|v| v.abs()).sum::<f64>() / self.samples.len() as f64
    }

    /// Right zero-padding to `n` samples. `n` shorter than the signal is an error.
    pub fn zero_padded(&self, n: usize) -> Result<SampledSignal> {
        ensure_param!(n >= self.len(), "cannot pad {} samples down to {n}", self.len());
        let mut samples = self.samples.clone();
        samples.resize(n, 0.0);
        Ok(SampledSignal { samples, fs: self.fs })
    }

    /// Keeps every `factor`-th sample starting at index 0; the sample rate is divided accordingly.
    pub fn decimated(&self, factor: usize) -> Result<SampledSignal> {
        ensure_param!(factor >= 1, "decimation factor must be at least 1");
        let samples: Vec<f64> = self.samples.iter().step_by(factor).copied().collect();
        Ok(SampledSignal { samples, fs: self.fs / factor as f64 })
    }
}

/// Unit-amplitude linear chirp, phase zero at the first sample:
/// `cos(2π (f0 t + (f1 - f0) t² / 2T))` for `t = k / fs`.
pub fn gen_linear_chirp(spec: &ChirpSpec) -> Result<SampledSignal> {
    spec.validate()?;
    let n = spec.len();
    let rate = (spec.f_end - spec.f_start) / spec.duration;
    let samples = (0..n)
        .map(|k| {
            let t = k as f64 / spec.fs;
            (2.0 * PI * (spec.f_start * t + 0.5 * rate * t * t)).cos()
        })
        .collect();
    SampledSignal::new(samples, spec.fs)
}

/// Lower bound on the recording window: flight time plus chirp length plus
/// reverberation allowance.
pub fn min_acquisition_time(channel_m: f64, speed_mps: f64, chirp_s: f64, reverb_s: f64) -> Result<f64> {
    for (name, v) in [("distance", channel_m), ("speed", speed_mps), ("chirp length", chirp_s), ("reverberation", reverb_s)] {
        ensure_param!(v.is_finite() && v > 0.0, "{name} must be positive, got {v}");
    }
    Ok(channel_m / speed_mps + chirp_s + reverb_s)
}

/// Peak SNR estimate `20 log10(peak|x| / noise_floor)`. An all-zero signal
/// yields `-inf`.
pub fn measured_snr_db(x: &SampledSignal, noise_floor: f64) -> Result<f64> {
    ensure_param!(noise_floor.is_finite() && noise_floor > 0.0, "noise floor must be positive");
    let peak = x.peak_abs();
    if peak == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(20.0 * (peak / noise_floor).log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chirp_lengths() {
        assert_eq!(gen_linear_chirp(&ChirpSpec::wideband()).unwrap().len(), 480);
        assert_eq!(gen_linear_chirp(&ChirpSpec::mote()).unwrap().len(), 150);
    }

    #[test]
    fn chirp_rejects_bad_specs() {
        assert!(ChirpSpec::new(0.0, 1000.0, 0.01, 48_000.0).is_err());
        assert!(ChirpSpec::new(1000.0, 30_000.0, 0.01, 48_000.0).is_err());
        assert!(ChirpSpec::new(1000.0, 2000.0, -1.0, 48_000.0).is_err());
        assert!(ChirpSpec::new(1000.0, 2000.0, 1e-5, 48_000.0).is_err());
        let bad = ChirpSpec { f_start: 1e3, f_end: 2e3, duration: 0.01, fs: f64::NAN };
        assert!(gen_linear_chirp(&bad).is_err());
    }

    #[test]
    fn degenerate_sweep_is_a_tone() {
        let spec = ChirpSpec::new(2_000.0, 2_000.0, 0.005, 16_000.0).unwrap();
        let x = gen_linear_chirp(&spec).unwrap();
        for (k, v) in x.samples().iter().enumerate() {
            let expected = (2.0 * PI * 2_000.0 * k as f64 / 16_000.0).cos();
            assert!((v - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn chirp_is_deterministic_and_unit_peak() {
        let a = gen_linear_chirp(&ChirpSpec::mote()).unwrap();
        let b = gen_linear_chirp(&ChirpSpec::mote()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.samples()[0], 1.0);
        assert!(a.peak_abs() <= 1.0);
    }

    #[test]
    fn acquisition_time() {
        let t = min_acquisition_time(10.0, 343.0, 0.01, 0.0008).unwrap();
        assert!((t - 0.04).abs() < 1e-3, "{t}");
        let t = min_acquisition_time(343.0, 343.0, 0.01, 0.01).unwrap();
        assert!((t - 1.02).abs() < 1e-12);
        let t = min_acquisition_time(1e-12, 343.0, 0.01, 1e-12).unwrap();
        assert!((t - 0.01).abs() < 1e-9);
        assert!(min_acquisition_time(0.0, 343.0, 0.01, 0.01).is_err());
        assert!(min_acquisition_time(1.0, -343.0, 0.01, 0.01).is_err());
    }

    #[test]
    fn snr_definition() {
        let x = SampledSignal::new(vec![0.0, -10.0, 3.0], 1.0).unwrap();
        assert!((measured_snr_db(&x, 1.0).unwrap() - 20.0).abs() < 1e-12);
        let x = SampledSignal::new(vec![1.0, 0.5], 1.0).unwrap();
        assert_eq!(measured_snr_db(&x, 1.0).unwrap(), 0.0);
        let z = SampledSignal::new(vec![0.0; 4], 1.0).unwrap();
        assert_eq!(measured_snr_db(&z, 1.0).unwrap(), f64::NEG_INFINITY);
        assert!(measured_snr_db(&x, 0.0).is_err());
    }

    #[test]
    fn sampled_signal_invariants() {
        assert!(SampledSignal::new(vec![], 1.0).is_err());
        assert!(SampledSignal::new(vec![f64::NAN], 1.0).is_err());
        assert!(SampledSignal::new(vec![1.0], 0.0).is_err());
        let s = SampledSignal::new(vec![1.0, 2.0, 3.0, 4.0, 5.0], 10.0).unwrap();
        assert_eq!(s.decimated(2).unwrap().samples(), &[1.0, 3.0, 5.0]);
        assert_eq!(s.decimated(2).unwrap().fs(), 5.0);
        assert_eq!(s.zero_padded(7).unwrap().samples(), &[1.0, 2.0, 3.0, 4.0, 5.0, 0.0, 0.0]);
        assert!(s.zero_padded(2).is_err());
    }
}
