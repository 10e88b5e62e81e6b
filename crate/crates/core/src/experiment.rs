//! Monte-Carlo sweeps, timing tables and the buffer comparison.
//!
//! Traces depend on (preset, SNR bucket, trial) but not on the compression
//! factor or method, so every α and every method in a sweep sees exactly the
//! same received signals.

use std::time::Instant;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{xcorr_fd, xcorr_td};
use crate::detect::{Method, RangeEstimate};
use crate::error::{ensure_param, Result};
use crate::pipeline::{range_trace, PipelineConfig};
use crate::rng;
use crate::sensing::{compress_counted, gen_sensing_matrix, measurements_per_buffer};
use crate::signal::{gen_linear_chirp, simulate_channel_samples, ChannelPreset, ChirpSpec, SampledSignal};

/// Half-open SNR interval `[lo, hi)` in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrBucket {
    pub lo: f64,
    pub hi: f64,
}

impl SnrBucket {
    pub const fn new(lo: f64, hi: f64) -> Self {
        SnrBucket { lo, hi }
    }

    /// The four buckets used throughout the characterization.
    pub fn standard() -> Vec<SnrBucket> {
        vec![Self::new(0.0, 5.0), Self::new(5.0, 10.0), Self::new(10.0, 20.0), Self::new(20.0, 30.0)]
    }

    pub fn label(&self) -> String {
        format!("[{}-{})", self.lo, self.hi)
    }
}

/// Chirp, window length and LoS delay range of the synthetic traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceProfile {
    pub chirp: ChirpSpec,
    pub trace_len: usize,
    pub min_delay: usize,
    pub max_delay: usize,
}

impl TraceProfile {
    /// 15 kHz, 3–7 kHz chirp of 150 samples in a 600-sample window.
    pub fn mote() -> Self {
        TraceProfile { chirp: ChirpSpec::mote(), trace_len: 600, min_delay: 30, max_delay: 380 }
    }

    /// 48 kHz, 1–20 kHz chirp of 480 samples in a 1440-sample window.
    pub fn wideband() -> Self {
        TraceProfile { chirp: ChirpSpec::wideband(), trace_len: 1440, min_delay: 20, max_delay: 760 }
    }

    pub fn reference(&self) -> Result<SampledSignal> {
        gen_linear_chirp(&self.chirp)
    }

    pub fn validate(&self) -> Result<()> {
        self.chirp.validate()?;
        ensure_param!(self.min_delay <= self.max_delay, "delay range is empty");
        let worst = self.max_delay + self.chirp.len() + ChannelPreset::CaseC.max_excess_delay(self.chirp.fs);
        ensure_param!(worst <= self.trace_len, "window of {} samples cannot hold delay {worst}", self.trace_len);
        Ok(())
    }
}

/// One synthetic received trace with its ground truth.
#[derive(Debug, Clone)]
pub struct Trial {
    pub trace: SampledSignal,
    pub truth_lag: usize,
    pub snr_db: f64,
    pub seed: u64,
}

/// Draws the LoS delay and SNR uniformly, then simulates the preset channel.
pub fn generate_trial(
    profile: &TraceProfile,
    p: &SampledSignal,
    preset: ChannelPreset,
    bucket: SnrBucket,
    seed: u64,
) -> Result<Trial> {
    let mut r = rng::from_seed(seed);
    let delay = r.random_range(profile.min_delay..=profile.max_delay);
    let snr_db = if bucket.hi > bucket.lo { r.random_range(bucket.lo..bucket.hi) } else { bucket.lo };
    let ch = preset.profile(delay, profile.chirp.fs, snr_db, rng::derive_seed(seed, 1));
    let (trace, truth_lag) = simulate_channel_samples(p, &ch, profile.trace_len)?;
    Ok(Trial { trace, truth_lag, snr_db, seed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub alphas: Vec<f64>,
    pub snr_buckets: Vec<SnrBucket>,
    pub presets: Vec<ChannelPreset>,
    pub trials: usize,
    pub seed: u64,
    pub profile: TraceProfile,
    pub pipeline: PipelineConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            methods: vec![Method::Sxcorr, Method::StructSxcorr],
            alphas: vec![0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.40, 0.50],
            snr_buckets: SnrBucket::standard(),
            presets: vec![ChannelPreset::CaseA],
            trials: 20,
            seed: 1,
            profile: TraceProfile::mote(),
            pipeline: PipelineConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_param!(!self.methods.is_empty(), "method set is empty");
        ensure_param!(!self.alphas.is_empty(), "alpha grid is empty");
        ensure_param!(self.alphas.iter().all(|a| *a > 0.0 && *a <= 1.0), "alphas must lie in (0, 1]");
        ensure_param!(!self.snr_buckets.is_empty(), "SNR grid is empty");
        ensure_param!(self.snr_buckets.iter().all(|b| b.lo <= b.hi), "SNR buckets must satisfy lo <= hi");
        ensure_param!(!self.presets.is_empty(), "preset list is empty");
        ensure_param!(self.trials >= 1, "trials must be at least 1");
        self.profile.validate()?;
        self.pipeline.solver.validate()
    }

    /// First 16 hex digits of the SHA-256 of the configuration's debug form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(format!("{self:?}").as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// One (cell, method, trial) outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub preset: ChannelPreset,
    pub snr_lo: f64,
    pub snr_hi: f64,
    pub alpha: f64,
    pub method: Method,
    pub trial: usize,
    pub seed: u64,
    pub snr_db: f64,
    pub truth_lag: usize,
    pub xcorr_offset: f64,
    pub detected_offset: f64,
    pub range_m: Option<f64>,
    pub valid: bool,
    pub fallback_used: bool,
    /// `|range − range_xcorr|` on the same trace; `None` when either failed.
    pub relative_error_m: Option<f64>,
    /// `|range − true range|`.
    pub truth_error_m: Option<f64>,
    pub config_hash: String,
}

fn trace_seed(base: u64, preset: usize, bucket: usize, trial: usize) -> u64 {
    rng::derive_seed(rng::derive_seed(rng::derive_seed(base, preset as u64), 1000 + bucket as u64), 2000 + trial as u64)
}

fn error_between(a: &RangeEstimate, b: &RangeEstimate) -> Option<f64> {
    match (a.valid, a.range_m, b.valid, b.range_m) {
        (true, Some(x), true, Some(y)) => Some((x - y).abs()),
        _ => None,
    }
}

struct Task {
    preset: usize,
    bucket: usize,
    trial: usize,
}

/// Runs every (preset, bucket, trial) trace through every (α, method).
/// Rows come back ordered by preset, bucket, α, method, trial; a failing
/// trial becomes an invalid row rather than aborting the sweep.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let p = cfg.profile.reference()?;
    let hash = cfg.hash();
    let tasks: Vec<Task> = (0..cfg.presets.len())
        .flat_map(|preset| {
            (0..cfg.snr_buckets.len()).flat_map(move |bucket| (0..cfg.trials).map(move |trial| Task { preset, bucket, trial }))
        })
        .collect();

    let per_task: Vec<Vec<SweepRow>> = tasks
        .par_iter()
        .map(|t| -> Result<Vec<SweepRow>> {
            let preset = cfg.presets[t.preset];
            let bucket = cfg.snr_buckets[t.bucket];
            let seed = trace_seed(cfg.seed, t.preset, t.bucket, t.trial);
            let trial = generate_trial(&cfg.profile, &p, preset, bucket, seed)?;
            let pipe = PipelineConfig { seed: rng::derive_seed(seed, 7), ..cfg.pipeline };
            let reference = range_trace(&trial.trace, &p, Method::Xcorr, &pipe)?;
            let truth_range = trial.truth_lag as f64 / p.fs() * pipe.speed;
            let mut rows = Vec::with_capacity(cfg.alphas.len() * cfg.methods.len());
            for &alpha in &cfg.alphas {
                for &method in &cfg.methods {
                    let est = if method == Method::Xcorr {
                        Ok(reference.clone())
                    } else {
                        range_trace(&trial.trace, &p, method, &PipelineConfig { alpha, ..pipe })
                    };
                    let est = est.unwrap_or_else(|e| {
                        log::warn!("trial {} {method} alpha {alpha}: {e}", t.trial);
                        failed_estimate(method)
                    });
                    rows.push(SweepRow {
                        preset,
                        snr_lo: bucket.lo,
                        snr_hi: bucket.hi,
                        alpha,
                        method,
                        trial: t.trial,
                        seed,
                        snr_db: trial.snr_db,
                        truth_lag: trial.truth_lag,
                        xcorr_offset: reference.sample_offset,
                        detected_offset: est.sample_offset,
                        range_m: est.range_m,
                        valid: est.valid,
                        fallback_used: est.fallback_used,
                        relative_error_m: error_between(&est, &reference),
                        truth_error_m: est.range_m.filter(|_| est.valid).map(|r| (r - truth_range).abs()),
                        config_hash: hash.clone(),
                    });
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    // Reorder from trial-major to (preset, bucket, alpha, method, trial).
    let mut rows: Vec<SweepRow> = per_task.into_iter().flatten().collect();
    let key = |r: &SweepRow| {
        let pi = cfg.presets.iter().position(|p| *p == r.preset).unwrap();
        let bi = cfg.snr_buckets.iter().position(|b| b.lo == r.snr_lo && b.hi == r.snr_hi).unwrap();
        let ai = cfg.alphas.iter().position(|a| *a == r.alpha).unwrap();
        let mi = cfg.methods.iter().position(|m| *m == r.method).unwrap();
        (pi, bi, ai, mi, r.trial)
    };
    rows.sort_by_key(key);
    Ok(rows)
}

fn failed_estimate(method: Method) -> RangeEstimate {
    RangeEstimate {
        method,
        detection_buffer: None,
        prior_buffer_count: 0,
        lag_hat: f64::NAN,
        sample_offset: f64::NAN,
        integer_offset: None,
        range_m: None,
        valid: false,
        status: crate::detect::Phase2Status::NoCandidates,
        fallback_used: false,
        refined: false,
    }
}

/// Median with failures counted as infinitely wrong; `None` for no samples.
pub fn median_with_failures(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let mut v: Vec<f64> = values.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub preset: ChannelPreset,
    pub snr_lo: f64,
    pub snr_hi: f64,
    pub alpha: f64,
    pub method: Method,
    pub trials: usize,
    pub failures: usize,
    /// Statistics of the relative error over successful trials.
    pub mean_m: f64,
    pub std_m: f64,
    /// Median with failures counted as infinite.
    pub median_m: f64,
}

/// Aggregates rows per (preset, bucket, α, method), preserving row order.
pub fn summarize(rows: &[SweepRow]) -> Vec<CellSummary> {
    let mut out: Vec<CellSummary> = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let r0 = &rows[start];
        let same = |r: &SweepRow| {
            r.preset == r0.preset && r.snr_lo == r0.snr_lo && r.snr_hi == r0.snr_hi && r.alpha == r0.alpha && r.method == r0.method
        };
        let end = start + rows[start..].iter().take_while(|r| same(r)).count();
        let cell = &rows[start..end];
        let ok: Vec<f64> = cell.iter().filter_map(|r| r.relative_error_m).collect();
        let mean = if ok.is_empty() { f64::NAN } else { ok.iter().sum::<f64>() / ok.len() as f64 };
        let std = if ok.len() < 2 {
            0.0
        } else {
            (ok.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (ok.len() - 1) as f64).sqrt()
        };
        out.push(CellSummary {
            preset: r0.preset,
            snr_lo: r0.snr_lo,
            snr_hi: r0.snr_hi,
            alpha: r0.alpha,
            method: r0.method,
            trials: cell.len(),
            failures: cell.len() - ok.len(),
            mean_m: mean,
            std_m: std,
            median_m: median_with_failures(cell.iter().map(|r| r.relative_error_m)).unwrap_or(f64::NAN),
        });
        start = end;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub operation: String,
    pub n: usize,
    pub alpha: Option<f64>,
    pub buffers: Option<usize>,
    pub multiply_adds: Option<u64>,
    pub seconds: f64,
}

fn best_of<F: FnMut()>(repeats: usize, mut f: F) -> f64 {
    (0..repeats.max(1))
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Wall-clock and multiply-add cost of correlation and of compression on an
/// `n`-sample trace. Each cell reports the best of `repeats` runs; sensing
/// matrices are generated outside the timed region, as they are stored on
/// the receiver.
pub fn run_timing(n: usize, alphas: &[f64], buffers: &[usize], repeats: usize, seed: u64) -> Result<Vec<TimingRow>> {
    ensure_param!(n >= 2, "trace length must be at least 2");
    let mut r = rng::from_seed(seed);
    let x: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    let p: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    let mut rows = vec![
        TimingRow {
            operation: "TD_XCORR".into(),
            n,
            alpha: None,
            buffers: None,
            multiply_adds: Some((n * n) as u64),
            seconds: best_of(repeats, || {
                std::hint::black_box(xcorr_td(&p, &x).unwrap());
            }),
        },
        TimingRow {
            operation: "FD_XCORR".into(),
            n,
            alpha: None,
            buffers: None,
            multiply_adds: None,
            seconds: best_of(repeats, || {
                std::hint::black_box(xcorr_fd(&p, &x).unwrap());
            }),
        },
    ];
    for &alpha in alphas {
        for &b in buffers {
            ensure_param!(b >= 1 && b <= n, "buffer count {b} out of range");
            let n_tilde = n.div_ceil(b);
            let m = measurements_per_buffer(alpha, n_tilde);
            ensure_param!(m >= 1, "alpha {alpha} leaves no measurements");
            let phi = gen_sensing_matrix(rng::derive_seed(seed, b as u64), m, n_tilde)?;
            let mut padded = x.clone();
            padded.resize(n_tilde * b, 0.0);
            let mut macs = 0;
            let seconds = best_of(repeats, || {
                macs = 0;
                for chunk in padded.chunks_exact(n_tilde) {
                    std::hint::black_box(compress_counted(chunk, &phi, &mut macs).unwrap());
                }
            });
            rows.push(TimingRow {
                operation: "COMPRESS".into(),
                n,
                alpha: Some(alpha),
                buffers: Some(b),
                multiply_adds: Some(macs),
                seconds,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferComparisonRow {
    pub preset: ChannelPreset,
    pub snr_lo: f64,
    pub snr_hi: f64,
    pub alpha: f64,
    pub trials: usize,
    pub buffers: usize,
    pub buffered_median_m: f64,
    pub single_median_m: f64,
    pub buffered_not_worse: bool,
}

/// Recovers the same traces with the rule-chosen buffer count and with a
/// single buffer, per (preset, bucket, α) cell, using structured recovery.
pub fn run_buffer_comparison(cfg: &ExperimentConfig) -> Result<Vec<BufferComparisonRow>> {
    cfg.validate()?;
    let p = cfg.profile.reference()?;
    let buffered_cfg = ExperimentConfig { methods: vec![Method::StructSxcorr], ..cfg.clone() };
    let single_cfg = ExperimentConfig {
        pipeline: PipelineConfig { buffers: Some(1), ..cfg.pipeline },
        ..buffered_cfg.clone()
    };
    let buffered = summarize(&run_sweep(&buffered_cfg)?);
    let single = summarize(&run_sweep(&single_cfg)?);
    let b = match cfg.pipeline.buffers {
        Some(b) => b,
        None => crate::sensing::buffer_count_for(p.len(), cfg.profile.trace_len)?,
    };
    Ok(buffered
        .iter()
        .zip(&single)
        .map(|(m, s)| BufferComparisonRow {
            preset: m.preset,
            snr_lo: m.snr_lo,
            snr_hi: m.snr_hi,
            alpha: m.alpha,
            trials: m.trials,
            buffers: b,
            buffered_median_m: m.median_m,
            single_median_m: s.median_m,
            buffered_not_worse: m.median_m <= s.median_m,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            methods: vec![Method::Xcorr, Method::StructSxcorr],
            alphas: vec![0.3],
            snr_buckets: vec![SnrBucket::new(20.0, 30.0)],
            presets: vec![ChannelPreset::CaseA],
            trials: 1,
            ..Default::default()
        }
    }

    #[test]
    fn one_trial_one_cell_per_method() {
        let rows = run_sweep(&tiny()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].method, Method::Xcorr);
        assert_eq!(rows[0].relative_error_m, Some(0.0));
        assert_eq!(summarize(&rows).len(), 2);
    }

    #[test]
    fn sweeps_are_reproducible() {
        let cfg = ExperimentConfig { trials: 3, alphas: vec![0.1, 0.3], ..tiny() };
        assert_eq!(run_sweep(&cfg).unwrap(), run_sweep(&cfg).unwrap());
        let other = ExperimentConfig { seed: 2, ..cfg.clone() };
        assert_ne!(cfg.hash(), other.hash());
    }

    #[test]
    fn traces_are_shared_across_alpha() {
        let cfg = ExperimentConfig { trials: 2, alphas: vec![0.1, 0.5], ..tiny() };
        let rows = run_sweep(&cfg).unwrap();
        let by_alpha = |a: f64| rows.iter().filter(|r| r.alpha == a).map(|r| (r.truth_lag, r.seed)).collect::<Vec<_>>();
        assert_eq!(by_alpha(0.1), by_alpha(0.5));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(run_sweep(&ExperimentConfig { trials: 0, ..tiny() }).is_err());
        assert!(run_sweep(&ExperimentConfig { alphas: vec![], ..tiny() }).is_err());
        assert!(run_sweep(&ExperimentConfig { alphas: vec![1.5], ..tiny() }).is_err());
    }

    #[test]
    fn medians_count_failures_as_infinite() {
        assert_eq!(median_with_failures([Some(1.0), None, Some(3.0)]), Some(3.0));
        assert_eq!(median_with_failures([Some(1.0), Some(2.0)]), Some(1.5));
        assert_eq!(median_with_failures([None, None, Some(0.0)]), Some(f64::INFINITY));
        assert_eq!(median_with_failures(std::iter::empty()), None);
    }

    #[test]
    fn timing_counts_follow_cost_model() {
        let rows = run_timing(480, &[0.3], &[1, 10], 1, 3).unwrap();
        let macs = |b: usize| rows.iter().find(|r| r.buffers == Some(b)).unwrap().multiply_adds.unwrap();
        assert_eq!(macs(1), 144 * 480);
        assert_eq!(macs(10), 10 * 14 * 48);
        assert_eq!(rows[0].multiply_adds, Some(480 * 480));
    }

    #[test]
    fn buffering_is_irrelevant_for_noiseless_full_rate() {
        let cfg = ExperimentConfig {
            alphas: vec![1.0],
            snr_buckets: vec![SnrBucket::new(f64::INFINITY, f64::INFINITY)],
            trials: 5,
            ..tiny()
        };
        let rows = run_buffer_comparison(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].buffers, 4);
        assert!(rows[0].buffered_median_m < 1e-3 && rows[0].single_median_m < 1e-3, "{:?}", rows[0]);
    }

    #[test]
    fn profiles_fit_their_windows() {
        TraceProfile::mote().validate().unwrap();
        TraceProfile::wideband().validate().unwrap();
        let bad = TraceProfile { max_delay: 500, ..TraceProfile::mote() };
        assert!(bad.validate().is_err());
    }
}
