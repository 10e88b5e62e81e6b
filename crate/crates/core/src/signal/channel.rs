use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SampledSignal;
use crate::error::{ensure_param, Error, Result};
use crate::rng;

/// One propagation path: integer-sample delay and real gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub delay: usize,
    pub gain: f64,
}

/// Multipath channel with additive white Gaussian noise.
///
/// The earliest path is the line-of-sight path; every other path must arrive
/// strictly later. `snr_db` is the LoS power (mean square over the chirp
/// support) relative to the noise variance. `f64::INFINITY` disables noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelProfile {
    pub paths: Vec<Path>,
    pub snr_db: f64,
    pub noise_seed: u64,
}

impl ChannelProfile {
    pub fn line_of_sight(delay: usize, snr_db: f64, noise_seed: u64) -> Self {
        ChannelProfile { paths: vec![Path { delay, gain: 1.0 }], snr_db, noise_seed }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_param!(!self.paths.is_empty(), "channel needs at least one path");
        ensure_param!(self.paths.iter().all(|p| p.gain.is_finite()), "path gains must be finite");
        ensure_param!(!self.snr_db.is_nan() && self.snr_db != f64::NEG_INFINITY, "snr_db must be a number or +inf");
        let los = self.los();
        let tied = self.paths.iter().filter(|p| p.delay == los.delay).count();
        ensure_param!(tied == 1, "reflected paths must arrive strictly after the line-of-sight path");
        ensure_param!(los.gain != 0.0, "line-of-sight gain must be nonzero");
        Ok(())
    }

    pub fn los(&self) -> Path {
        *self.paths.iter().min_by_key(|p| p.delay).expect("validated non-empty")
    }

    pub fn max_delay(&self) -> usize {
        self.paths.iter().map(|p| p.delay).max().unwrap_or(0)
    }
}

/// Synthesizes a received trace lasting `t_a` seconds. Returns the trace and
/// the LoS delay in samples.
pub fn simulate_channel(p: &SampledSignal, ch: &ChannelProfile, t_a: f64) -> Result<(SampledSignal, usize)> {
    ensure_param!(t_a.is_finite() && t_a > 0.0, "acquisition time must be positive");
    let n = (t_a * p.fs()).round() as usize;
    simulate_channel_samples(p, ch, n)
}

/// As [`simulate_channel`] with the acquisition window given in samples.
pub fn simulate_channel_samples(p: &SampledSignal, ch: &ChannelProfile, n: usize) -> Result<(SampledSignal, usize)> {
    ch.validate()?;
    let needed = p.len() + ch.max_delay();
    ensure_param!(n >= needed, "acquisition window of {n} samples is shorter than chirp plus max delay ({needed})");

    let mut x = vec![0.0; n];
    for path in &ch.paths {
        for (k, v) in p.samples().iter().enumerate() {
            x[path.delay + k] += path.gain * v;
        }
    }

    if ch.snr_db.is_finite() {
        let los = ch.los();
        let los_power = los.gain * los.gain * p.samples().iter().map(|v| v * v).sum::<f64>() / p.len() as f64;
        if los_power == 0.0 {
            return Err(Error::Parameter("reference signal has no energy".into()));
        }
        let target = los_power / 10f64.powf(ch.snr_db / 10.0);
        let mut noise_rng = rng::from_seed(ch.noise_seed);
        let mut noise: Vec<f64> = (0..n).map(|_| noise_rng.sample(StandardNormal)).collect();
        let realized = noise.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let scale = (target / realized).sqrt();
        for (xi, ni) in x.iter_mut().zip(noise.iter_mut()) {
            *xi += *ni * scale;
        }
    }

    Ok((SampledSignal::new(x, p.fs())?, ch.los().delay))
}

/// Synthetic stand-ins for the three measurement environments: open air
/// (LoS only), a large hall (two mild late echoes) and a small furnished room
/// (seven reflections, two of them early and strong).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ChannelPreset {
    CaseA,
    CaseB,
    CaseC,
}

/// (excess delay range in seconds, gain magnitude range) per reflection.
type Reflection = ((f64, f64), (f64, f64));

const CASE_B: &[Reflection] = &[((1.0e-3, 2.5e-3), (0.35, 0.45)), ((2.5e-3, 4.0e-3), (0.25, 0.35))];
const CASE_C: &[Reflection] = &[
    ((0.27e-3, 0.8e-3), (0.5, 0.6)),
    ((0.8e-3, 1.4e-3), (0.45, 0.55)),
    ((1.4e-3, 2.0e-3), (0.35, 0.45)),
    ((2.0e-3, 2.6e-3), (0.3, 0.4)),
    ((2.6e-3, 3.2e-3), (0.25, 0.35)),
    ((3.2e-3, 3.6e-3), (0.2, 0.3)),
    ((3.6e-3, 4.0e-3), (0.15, 0.25)),
];

impl ChannelPreset {
    pub const ALL: [ChannelPreset; 3] = [ChannelPreset::CaseA, ChannelPreset::CaseB, ChannelPreset::CaseC];

    fn reflections(self) -> &'static [Reflection] {
        match self {
            ChannelPreset::CaseA => &[],
            ChannelPreset::CaseB => CASE_B,
            ChannelPreset::CaseC => CASE_C,
        }
    }

    pub fn path_count(self) -> usize {
        self.reflections().len() + 1
    }

    /// Largest excess delay any reflection can take, in samples at `fs`.
    pub fn max_excess_delay(self, fs: f64) -> usize {
        self.reflections().iter().map(|r| (r.0 .1 * fs).ceil() as usize).max().unwrap_or(0)
    }

    /// Draws a concrete channel. Reflection delays and gains are uniform in
    /// their ranges; gain signs are random.
    pub fn profile(self, los_delay: usize, fs: f64, snr_db: f64, seed: u64) -> ChannelProfile {
        let mut r = rng::from_seed(seed);
        let mut paths = vec![Path { delay: los_delay, gain: 1.0 }];
        for &((d_lo, d_hi), (g_lo, g_hi)) in self.reflections() {
            let excess = ((r.random_range(d_lo..d_hi) * fs).round() as usize).max(1);
            let mut gain = r.random_range(g_lo..g_hi);
            if r.random_bool(0.5) {
                gain = -gain;
            }
            // Two reflections landing on the same sample merge into one path.
            if let Some(existing) = paths.iter_mut().find(|p| p.delay == los_delay + excess) {
                existing.gain += gain;
            } else {
                paths.push(Path { delay: los_delay + excess, gain });
            }
        }
        ChannelProfile { paths, snr_db, noise_seed: rng::derive_seed(seed, 0x006e_6f69_7365) }
    }
}

impl std::fmt::Display for ChannelPreset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ChannelPreset::CaseA => "CASE_A",
            ChannelPreset::CaseB => "CASE_B",
            ChannelPreset::CaseC => "CASE_C",
        })
    }
}

impl std::str::FromStr for ChannelPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CASE_A" | "A" => Ok(ChannelPreset::CaseA),
            "CASE_B" | "B" => Ok(ChannelPreset::CaseB),
            "CASE_C" | "C" => Ok(ChannelPreset::CaseC),
            other => Err(Error::Parameter(format!("unknown channel preset {other:?}"))),
        }
    }
}
