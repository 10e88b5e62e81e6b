//! Peak detection over per-buffer coefficients and conversion to range.
//!
//! A chirp whose delay is `ñ·i + d` (with `0 <= d < ñ`) appears in buffer `i`
//! at lag `-d` and, if it spills over, in buffer `i + 1` at lag `ñ - d > 0`.
//! Every range is therefore `(ñ·b + lag_hat) / fs · v_s` with `lag_hat = -lag`
//! measured in the buffer `b` that holds the selected peak.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_param, Result};
use crate::recovery::SparseCoefficients;
use crate::signal::SampledSignal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Method {
    Xcorr,
    Sxcorr,
    StructSxcorr,
    Dct,
    DownsampleXcorr,
    DownsampleStructSxcorr,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Xcorr,
        Method::Sxcorr,
        Method::StructSxcorr,
        Method::Dct,
        Method::DownsampleXcorr,
        Method::DownsampleStructSxcorr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Xcorr => "XCORR",
            Method::Sxcorr => "SXCORR",
            Method::StructSxcorr => "STRUCT_SXCORR",
            Method::Dct => "DCT",
            Method::DownsampleXcorr => "DOWNSAMPLE_XCORR",
            Method::DownsampleStructSxcorr => "DOWNSAMPLE_STRUCT_SXCORR",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| crate::Error::Parameter(format!("unknown method {s:?}")))
    }
}

/// What Phase 2 does when the lag-sign rule cannot confirm the tallest peak.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// Report the tallest peak as invalid.
    Strict,
    /// Accept the tallest peak anyway.
    TallestAnywhere,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    pub sigma: f64,
    pub fallback: Fallback,
    pub refine: bool,
}

impl DetectConfig {
    /// Six standard deviations, strict validation.
    pub fn strict() -> Self {
        DetectConfig { sigma: 6.0, fallback: Fallback::Strict, refine: true }
    }

    /// Six standard deviations, tallest peak accepted when validation fails.
    pub fn benchmark() -> Self {
        DetectConfig { sigma: 6.0, fallback: Fallback::TallestAnywhere, refine: true }
    }

    /// The relaxed threshold used on the mote.
    pub fn mote() -> Self {
        DetectConfig { sigma: 3.0, ..Self::benchmark() }
    }
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self::benchmark()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakCandidate {
    pub buffer_index: usize,
    pub lag: isize,
    /// Position in the buffer's coefficient vector.
    pub index: usize,
    pub magnitude: f64,
    pub threshold_sigma: f64,
}

/// Per buffer, the tallest local maximum of `|s|` that reaches
/// `mean + sigma · stddev` of that buffer's `|s|`. Ties go to the earliest
/// arrival (largest lag). Buffers without a qualifying peak contribute nothing.
pub fn detect_phase1(coeffs: &[SparseCoefficients], sigma: f64) -> Vec<PeakCandidate> {
    coeffs.iter().filter_map(|c| buffer_peak(c, sigma)).collect()
}

fn buffer_peak(c: &SparseCoefficients, sigma: f64) -> Option<PeakCandidate> {
    let a: Vec<f64> = c.values.iter().map(|v| v.abs()).collect();
    let n = a.len() as f64;
    if a.is_empty() {
        return None;
    }
    let mean = a.iter().sum::<f64>() / n;
    let std = (a.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let threshold = mean + sigma * std;
    let mut best: Option<usize> = None;
    for i in 0..a.len() {
        let left = if i > 0 { a[i - 1] } else { 0.0 };
        let right = a.get(i + 1).copied().unwrap_or(0.0);
        let qualifies = a[i] > 0.0 && a[i] >= left && a[i] >= right && a[i] >= threshold && a[i] > mean;
        if qualifies && best.is_none_or(|b| a[i] >= a[b]) {
            best = Some(i);
        }
    }
    best.map(|i| PeakCandidate {
        buffer_index: c.buffer_index,
        lag: c.lag(i),
        index: i,
        magnitude: a[i],
        threshold_sigma: sigma,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase2Status {
    /// Only one buffer produced a candidate.
    Single,
    /// The neighbouring buffer confirmed the lag sign (or the lag is zero).
    Consistent,
    /// The neighbour's candidate has the wrong sign.
    Inconsistent,
    /// The neighbour that should confirm the lag has no candidate.
    NeighborMissing,
    /// No buffer produced a candidate.
    NoCandidates,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub candidate: Option<PeakCandidate>,
    pub status: Phase2Status,
    pub fallback_used: bool,
    pub valid: bool,
}

/// Picks the tallest candidate across buffers and checks the lag-sign rule:
/// a negative lag needs a positive-lag candidate in the next buffer, a
/// positive lag needs a negative-lag candidate in the previous buffer.
pub fn detect_phase2(candidates: &[PeakCandidate], fallback: Fallback) -> Selection {
    let tallest = candidates.iter().copied().reduce(|best, c| {
        if c.magnitude > best.magnitude || (c.magnitude == best.magnitude && c.buffer_index < best.buffer_index) {
            c
        } else {
            best
        }
    });
    let Some(top) = tallest else {
        return Selection { candidate: None, status: Phase2Status::NoCandidates, fallback_used: false, valid: false };
    };
    let status = if candidates.len() == 1 {
        Phase2Status::Single
    } else {
        let neighbour = |b: Option<usize>| b.and_then(|b| candidates.iter().find(|c| c.buffer_index == b));
        let check = match top.lag.signum() {
            0 => None,
            -1 => Some((neighbour(top.buffer_index.checked_add(1)), 1)),
            _ => Some((neighbour(top.buffer_index.checked_sub(1)), -1)),
        };
        match check {
            None => Phase2Status::Consistent,
            Some((None, _)) => Phase2Status::NeighborMissing,
            Some((Some(n), sign)) if n.lag.signum() == sign => Phase2Status::Consistent,
            Some(_) => Phase2Status::Inconsistent,
        }
    };
    let confirmed = matches!(status, Phase2Status::Single | Phase2Status::Consistent);
    let fallback_used = !confirmed && fallback == Fallback::TallestAnywhere;
    if !confirmed {
        log::debug!("phase 2 rejected buffer {} lag {}: {status:?}", top.buffer_index, top.lag);
    }
    Selection { candidate: Some(top), status, fallback_used, valid: confirmed || fallback_used }
}

/// `(ñ · b_prev + lag_hat) / fs · v_s`, or `None` when the total sample
/// offset is negative.
pub fn estimate_range(b_prev: usize, lag_hat: f64, n_tilde: usize, fs: f64, v_s: f64) -> Result<Option<f64>> {
    ensure_param!(fs > 0.0 && fs.is_finite(), "sample rate must be positive");
    ensure_param!(v_s > 0.0 && v_s.is_finite(), "speed of sound must be positive");
    ensure_param!(lag_hat.is_finite(), "lag must be finite");
    let offset = (n_tilde * b_prev) as f64 + lag_hat;
    Ok((offset >= 0.0).then(|| offset / fs * v_s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    /// Vertex offset from the peak index, in samples.
    pub offset: f64,
    pub refined: bool,
}

/// Vertex of the parabola through the magnitudes at `peak - 1`, `peak`,
/// `peak + 1`. Boundary peaks and non-maxima come back unrefined; otherwise
/// `|offset| <= 0.5`.
pub fn parabolic_refine(values: &[f64], peak: usize) -> Refinement {
    let unrefined = Refinement { offset: 0.0, refined: false };
    if peak == 0 || peak + 1 >= values.len() {
        return unrefined;
    }
    let (l, c, r) = (values[peak - 1].abs(), values[peak].abs(), values[peak + 1].abs());
    let denom = l - 2.0 * c + r;
    if c < l || c < r || denom >= 0.0 {
        return unrefined;
    }
    Refinement { offset: 0.5 * (l - r) / denom, refined: true }
}

pub fn speed_of_sound(temp_c: f64) -> f64 {
    331.4 + 0.6 * temp_c
}

/// Ratio of peak to mean absolute amplitude; zero for a silent trace.
pub fn peak_to_mean_ratio(x: &SampledSignal) -> f64 {
    let mean = x.mean_abs();
    if mean == 0.0 {
        0.0
    } else {
        x.peak_abs() / mean
    }
}

/// Compression factor chosen from the peak-to-mean ratio, with each bucket
/// closed at its upper edge.
pub fn alpha_for_rho(rho: f64) -> f64 {
    match rho {
        r if r > 30.0 => 0.05,
        r if r > 20.0 => 0.10,
        r if r > 15.0 => 0.20,
        r if r > 10.0 => 0.30,
        r if r > 5.0 => 0.50,
        _ => 1.00,
    }
}

pub fn alpha_from_rho(x: &SampledSignal) -> f64 {
    alpha_for_rho(peak_to_mean_ratio(x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackOutcome {
    pub alpha: f64,
    pub valid: bool,
    /// Every compression factor tried, in order, with its detection outcome.
    pub log: Vec<(f64, bool)>,
}

impl FeedbackOutcome {
    /// Measurements spent by the whole search relative to a single attempt at
    /// `fixed`, as extra percent.
    pub fn overhead_percent(&self, fixed: f64) -> f64 {
        let spent: f64 = self.log.iter().map(|(a, _)| a).sum();
        100.0 * (spent / fixed - 1.0)
    }
}

/// Walks the compression factor in `step` increments: downward from a
/// successful start until detection fails, upward from a failed start until
/// it succeeds. The result stays within `(0, 1]`.
pub fn alpha_feedback_loop<F>(start: f64, step: f64, mut detector: F) -> Result<FeedbackOutcome>
where
    F: FnMut(f64) -> Result<bool>,
{
    ensure_param!(start > 0.0 && start <= 1.0, "start alpha must lie in (0, 1]");
    ensure_param!(step > 0.0 && step < 1.0, "step must lie in (0, 1)");
    let snap = |a: f64| (a * 1e9).round() / 1e9;
    let mut log = Vec::new();
    let mut try_alpha = |a: f64, log: &mut Vec<(f64, bool)>| -> Result<bool> {
        let ok = detector(a)?;
        log.push((a, ok));
        Ok(ok)
    };

    let mut alpha = snap(start);
    if try_alpha(alpha, &mut log)? {
        loop {
            let next = snap(alpha - step);
            if next <= 0.0 || !try_alpha(next, &mut log)? {
                return Ok(FeedbackOutcome { alpha, valid: true, log });
            }
            alpha = next;
        }
    }
    while alpha < 1.0 {
        alpha = snap((alpha + step).min(1.0));
        if try_alpha(alpha, &mut log)? {
            return Ok(FeedbackOutcome { alpha, valid: true, log });
        }
    }
    Ok(FeedbackOutcome { alpha: 1.0, valid: false, log })
}

/// One ranging outcome. `sample_offset = ñ · prior_buffer_count + lag_hat`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeEstimate {
    pub method: Method,
    pub detection_buffer: Option<usize>,
    pub prior_buffer_count: usize,
    /// Fractional lag after refinement, in full-rate samples.
    pub lag_hat: f64,
    pub sample_offset: f64,
    /// Offset before refinement.
    pub integer_offset: Option<isize>,
    pub range_m: Option<f64>,
    pub valid: bool,
    pub status: Phase2Status,
    pub fallback_used: bool,
    pub refined: bool,
}

impl RangeEstimate {
    fn failed(method: Method, status: Phase2Status) -> Self {
        RangeEstimate {
            method,
            detection_buffer: None,
            prior_buffer_count: 0,
            lag_hat: f64::NAN,
            sample_offset: f64::NAN,
            integer_offset: None,
            range_m: None,
            valid: false,
            status,
            fallback_used: false,
            refined: false,
        }
    }
}

/// Frame shared by every ranging path.
#[derive(Debug, Clone, Copy)]
pub struct RangeFrame {
    pub n_tilde: usize,
    pub fs: f64,
    pub speed: f64,
    /// Decimation factor between the coefficient grid and the full-rate grid.
    pub scale: usize,
}

/// Two-phase detection over per-buffer coefficients, then range conversion.
pub fn range_from_coefficients(
    buffers: &[SparseCoefficients],
    frame: RangeFrame,
    det: &DetectConfig,
    method: Method,
) -> Result<RangeEstimate> {
    let sel = detect_phase2(&detect_phase1(buffers, det.sigma), det.fallback);
    let Some(c) = sel.candidate else {
        return Ok(RangeEstimate::failed(method, sel.status));
    };
    let values = &buffers.iter().find(|b| b.buffer_index == c.buffer_index).expect("candidate buffer").values;
    let mut est = assemble(c.buffer_index, c.lag, values, c.index, frame, det.refine, method)?;
    est.status = sel.status;
    est.fallback_used = sel.fallback_used;
    est.valid &= sel.valid;
    Ok(est)
}

/// Range from the global maximum of `|s|²` over a full correlation sequence.
pub fn range_from_correlation(
    c: &crate::baselines::Correlation,
    frame: RangeFrame,
    refine: bool,
    method: Method,
) -> Result<RangeEstimate> {
    let Some(lag) = crate::baselines::argmax_delay(c) else {
        return Ok(RangeEstimate::failed(method, Phase2Status::NoCandidates));
    };
    if c.values.iter().all(|v| *v == 0.0) {
        return Ok(RangeEstimate::failed(method, Phase2Status::NoCandidates));
    }
    let idx = c.index(lag).expect("argmax index");
    let mut est = assemble(0, lag, &c.values, idx, frame, refine, method)?;
    est.status = Phase2Status::Single;
    Ok(est)
}

fn assemble(
    buffer: usize,
    lag: isize,
    values: &[f64],
    index: usize,
    frame: RangeFrame,
    refine: bool,
    method: Method,
) -> Result<RangeEstimate> {
    let r = if refine { parabolic_refine(values, index) } else { Refinement { offset: 0.0, refined: false } };
    let scale = frame.scale as f64;
    let lag_hat = -(lag as f64 + r.offset) * scale;
    let range = estimate_range(buffer, lag_hat, frame.n_tilde * frame.scale, frame.fs, frame.speed)?;
    Ok(RangeEstimate {
        method,
        detection_buffer: Some(buffer),
        prior_buffer_count: buffer,
        lag_hat,
        sample_offset: (frame.n_tilde * frame.scale * buffer) as f64 + lag_hat,
        integer_offset: Some((frame.n_tilde * buffer) as isize * frame.scale as isize - lag * frame.scale as isize),
        range_m: range,
        valid: range.is_some(),
        status: Phase2Status::Single,
        fallback_used: false,
        refined: r.refined,
    })
}
