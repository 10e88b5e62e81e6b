//! End-to-end ranging of one received trace with any method.

use serde::{Deserialize, Serialize};

use crate::baselines::{dct_baseline, downsample_baseline, xcorr_fd, DownsampleMode};
use crate::detect::{range_from_coefficients, range_from_correlation, DetectConfig, Method, RangeEstimate, RangeFrame};
use crate::error::{ensure_param, Result};
use crate::recovery::{recover_buffered, RecoveryMode, SolverConfig};
use crate::sensing::{buffer_count_for, compress_buffered};
use crate::signal::SampledSignal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub alpha: f64,
    /// Buffer count; `None` makes each buffer one reference long.
    pub buffers: Option<usize>,
    pub seed: u64,
    pub solver: SolverConfig,
    pub detect: DetectConfig,
    /// Speed of sound, m/s.
    pub speed: f64,
    pub downsample_factor: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            alpha: 0.30,
            buffers: None,
            seed: 0,
            solver: SolverConfig::default(),
            detect: DetectConfig::benchmark(),
            speed: 343.0,
            downsample_factor: 3,
        }
    }
}

/// Decimation factor whose kept fraction is closest to `fraction`.
pub fn factor_for_fraction(fraction: f64) -> usize {
    (1.0 / fraction).round().max(1.0) as usize
}

pub fn buffer_count(cfg: &PipelineConfig, p: &SampledSignal, x: &SampledSignal) -> Result<usize> {
    match cfg.buffers {
        Some(b) => {
            ensure_param!(b >= 1, "buffer count must be at least 1");
            Ok(b)
        }
        None => buffer_count_for(p.len(), x.len()),
    }
}

pub fn range_trace(x: &SampledSignal, p: &SampledSignal, method: Method, cfg: &PipelineConfig) -> Result<RangeEstimate> {
    ensure_param!(x.fs() == p.fs(), "trace at {} Hz, reference at {} Hz", x.fs(), p.fs());
    let compressed = |mode: RecoveryMode| -> Result<RangeEstimate> {
        let b = buffer_count(cfg, p, x)?;
        let packets = compress_buffered(x, b, cfg.alpha, cfg.seed)?;
        let rec = recover_buffered(&packets, p, &cfg.solver, mode)?;
        let frame = RangeFrame { n_tilde: rec.n_tilde, fs: x.fs(), speed: cfg.speed, scale: 1 };
        range_from_coefficients(&rec.buffers, frame, &cfg.detect, method)
    };
    match method {
        Method::Xcorr => {
            let corr = xcorr_fd(p.samples(), x.samples())?;
            let frame = RangeFrame { n_tilde: x.len(), fs: x.fs(), speed: cfg.speed, scale: 1 };
            range_from_correlation(&corr, frame, cfg.detect.refine, method)
        }
        Method::Sxcorr => compressed(RecoveryMode::Sxcorr),
        Method::StructSxcorr => compressed(RecoveryMode::StructSxcorr),
        Method::Dct => {
            let b = buffer_count(cfg, p, x)?;
            let packets = compress_buffered(x, b, cfg.alpha, cfg.seed)?;
            dct_baseline(&packets, p, &cfg.solver, &cfg.detect, RecoveryMode::StructSxcorr, cfg.speed)
        }
        Method::DownsampleXcorr => downsample_baseline(
            x,
            cfg.downsample_factor,
            p,
            DownsampleMode::Xcorr,
            &cfg.solver,
            &cfg.detect,
            cfg.speed,
        ),
        Method::DownsampleStructSxcorr => downsample_baseline(
            x,
            cfg.downsample_factor,
            p,
            DownsampleMode::StructSxcorr,
            &cfg.solver,
            &cfg.detect,
            cfg.speed,
        ),
    }
}
