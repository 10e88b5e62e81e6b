//! Competing ways to spend the same sample budget: compressed recovery in
//! the DCT domain, and plain decimation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::transform::dct_matrix;
use super::xcorr_fd;
use crate::detect::{range_from_coefficients, range_from_correlation, DetectConfig, Method, RangeEstimate, RangeFrame};
use crate::dictionary::CorrelationDictionary;
use crate::error::{ensure_param, Error, Result};
use crate::recovery::{check_consistent, solve_l1, structured_prune, RecoveryMode, SolverConfig};
use crate::sensing::{gen_sensing_matrix, MeasurementPacket};
use crate::signal::SampledSignal;

/// Rebuilds each buffer from its DCT coefficients recovered by ℓ1, then
/// correlates the reassembled trace with `p`. Missing buffers are zeros.
///
/// DCT atoms are orthogonal, so structured pruning in this domain keeps
/// exactly the `k` largest coefficients.
pub fn dct_baseline(
    packets: &[MeasurementPacket],
    p: &SampledSignal,
    solver: &SolverConfig,
    det: &DetectConfig,
    mode: RecoveryMode,
    speed: f64,
) -> Result<RangeEstimate> {
    solver.validate()?;
    if packets.is_empty() {
        return Err(Error::Protocol("no packets to recover".into()));
    }
    check_consistent(packets)?;
    let head = &packets[0];
    let n = head.n_tilde as usize;
    ensure_param!(p.fs() == head.fs_hz as f64, "reference and packets disagree on sample rate");
    let phi = gen_sensing_matrix(head.seed, head.y_tilde.len(), n)?;
    let dense_phi = DMatrix::from_fn(phi.rows(), n, |r, c| phi.entry(r, c));
    let basis_t = dct_matrix(n).transpose();
    let a = &dense_phi * &basis_t;

    let mut trace = vec![0.0; n * head.buffer_count as usize];
    for pk in packets {
        let y: Vec<f64> = pk.y_tilde.iter().map(|&v| v as f64 * phi.scale()).collect();
        let mut c = solve_l1(&a, &y, solver)?.values;
        if mode == RecoveryMode::StructSxcorr {
            keep_largest(&mut c, solver.k);
        }
        let xb = &basis_t * nalgebra::DVector::from_vec(c);
        let start = pk.buffer_index as usize * n;
        trace[start..start + n].copy_from_slice(xb.as_slice());
    }
    let corr = xcorr_fd(p.samples(), &trace)?;
    let frame = RangeFrame { n_tilde: n, fs: p.fs(), speed, scale: 1 };
    range_from_correlation(&corr, frame, det.refine, Method::Dct)
}

fn keep_largest(c: &mut [f64], k: usize) {
    let mut order: Vec<usize> = (0..c.len()).collect();
    order.sort_by(|&a, &b| c[b].abs().total_cmp(&c[a].abs()).then(a.cmp(&b)));
    for &i in order.iter().skip(k) {
        c[i] = 0.0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DownsampleMode {
    Xcorr,
    StructSxcorr,
}

/// Keeps every `factor`-th sample of `x` and `p`. `Xcorr` correlates the
/// decimated pair directly; `StructSxcorr` solves `Ψ′ s ≈ x↓` with `Ψ′` the
/// correlation dictionary of the decimated reference, then prunes. Lags are
/// scaled back to the full-rate grid.
pub fn downsample_baseline(
    x: &SampledSignal,
    factor: usize,
    p: &SampledSignal,
    mode: DownsampleMode,
    solver: &SolverConfig,
    det: &DetectConfig,
    speed: f64,
) -> Result<RangeEstimate> {
    ensure_param!(factor >= 1, "decimation factor must be at least 1");
    ensure_param!(x.fs() == p.fs(), "trace and reference disagree on sample rate");
    let xd = x.decimated(factor)?;
    let pd = p.decimated(factor)?;
    ensure_param!(
        xd.len() >= pd.len(),
        "decimated trace ({} samples) is shorter than the decimated reference ({})",
        xd.len(),
        pd.len()
    );
    let frame = RangeFrame { n_tilde: xd.len(), fs: x.fs(), speed, scale: factor };
    match mode {
        DownsampleMode::Xcorr => {
            let corr = xcorr_fd(pd.samples(), xd.samples())?;
            range_from_correlation(&corr, frame, det.refine, Method::DownsampleXcorr)
        }
        DownsampleMode::StructSxcorr => {
            let dict = CorrelationDictionary::build(&pd, xd.len())?;
            let mut s = solve_l1(&dict.to_dense(), xd.samples(), solver)?;
            s.zero_index = xd.len() - 1;
            let s = structured_prune(&s, &dict, solver.k, solver.mu0)?;
            range_from_coefficients(&[s], frame, det, Method::DownsampleStructSxcorr)
        }
    }
}
