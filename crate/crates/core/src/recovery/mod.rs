//! Per-buffer sparse recovery of correlation coefficients.

mod solver;

pub use solver::{solve_l1, SolverConfig, SolverDiagnostics, SparseCoefficients};
pub(crate) use solver::argmax_abs;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{xcorr_fd, xcorr_td};
use crate::dictionary::CorrelationDictionary;
use crate::error::{ensure_param, Error, Result};
use crate::sensing::{gen_sensing_matrix, MeasurementPacket, SensingMatrix};
use crate::signal::SampledSignal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RecoveryMode {
    Sxcorr,
    StructSxcorr,
}

/// Greedy coherence pruning. Repeatedly moves the largest remaining entry to
/// the output and clears every entry whose column is at least `mu0`-coherent
/// with it, for at most `k` selections.
///
/// The output has at most `k` nonzeros, their columns are pairwise less than
/// `mu0` coherent, and the largest input entry is always kept.
pub fn structured_prune(
    s: &SparseCoefficients,
    dict: &CorrelationDictionary,
    k: usize,
    mu0: f64,
) -> Result<SparseCoefficients> {
    ensure_param!(s.len() == dict.cols(), "{} coefficients for a {}-column dictionary", s.len(), dict.cols());
    ensure_param!(s.values.iter().all(|v| v.is_finite()), "coefficients must be finite");
    ensure_param!(mu0 > 0.0 && mu0 <= 1.0, "mu0 must lie in (0, 1]");
    let mut work = s.values.clone();
    let mut out = SparseCoefficients { values: vec![0.0; s.len()], ..s.clone() };
    for _ in 0..k {
        let Some(l_star) = argmax_abs(&work) else { break };
        out.values[l_star] = work[l_star];
        work[l_star] = 0.0;
        if !dict.is_zero_column(l_star) {
            for j in dict.coherent_index_set(l_star, mu0)? {
                work[j] = 0.0;
            }
        }
    }
    Ok(out)
}

/// Scaled operator `Φ̃ Ψ̃ / √m̃`. Row `r` is the correlation of the padded
/// reference with the sign row `r`, which is exactly `(Φ̄ Ψ̃)[r, ·]`.
pub fn measurement_operator(phi: &SensingMatrix, dict: &CorrelationDictionary) -> Result<DMatrix<f64>> {
    ensure_param!(phi.cols() == dict.rows(), "sensing width {} differs from window {}", phi.cols(), dict.rows());
    let p = dict.source().zero_padded(dict.rows())?.into_samples();
    let scale = phi.scale();
    let rows: Vec<Vec<f64>> = (0..phi.rows())
        .into_par_iter()
        .map(|r| {
            let signs: Vec<f64> = phi.row_signs(r).iter().map(|&s| s as f64).collect();
            let c = if p.len() > 256 { xcorr_fd(&p, &signs) } else { xcorr_td(&p, &signs) };
            c.map(|c| c.values)
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(phi.rows(), dict.cols(), |r, j| rows[r][j] * scale))
}

/// Recovered coefficients for every buffer that arrived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferedRecovery {
    /// Sorted by buffer index.
    pub buffers: Vec<SparseCoefficients>,
    /// Buffer indices with no packet.
    pub missing: Vec<usize>,
    pub buffer_count: usize,
    pub n_tilde: usize,
    pub fs: f64,
    pub alpha: f64,
}

pub(crate) fn check_consistent(packets: &[MeasurementPacket]) -> Result<()> {
    let first = &packets[0];
    for p in packets {
        p.validate().map_err(|e| Error::Protocol(e.to_string()))?;
        let same = p.seed == first.seed
            && p.alpha == first.alpha
            && p.n_tilde == first.n_tilde
            && p.fs_hz == first.fs_hz
            && p.buffer_count == first.buffer_count
            && p.y_tilde.len() == first.y_tilde.len();
        if !same {
            return Err(Error::Protocol(format!(
                "packet for buffer {} disagrees with buffer {} on stream metadata",
                p.buffer_index, first.buffer_index
            )));
        }
    }
    let mut seen = vec![false; first.buffer_count as usize];
    for p in packets {
        if std::mem::replace(&mut seen[p.buffer_index as usize], true) {
            return Err(Error::Protocol(format!("duplicate packet for buffer {}", p.buffer_index)));
        }
    }
    Ok(())
}

/// Regenerates the sensing matrix from the packet seed, builds the window
/// dictionary from `p`, and solves every buffer independently.
pub fn recover_buffered(
    packets: &[MeasurementPacket],
    p: &SampledSignal,
    cfg: &SolverConfig,
    mode: RecoveryMode,
) -> Result<BufferedRecovery> {
    cfg.validate()?;
    ensure_param!(!p.is_empty(), "reference signal is empty");
    if packets.is_empty() {
        return Err(Error::Protocol("no packets to recover".into()));
    }
    check_consistent(packets)?;
    let head = &packets[0];
    let n_tilde = head.n_tilde as usize;
    ensure_param!(
        p.fs() == head.fs_hz as f64,
        "reference sampled at {} Hz but packets at {} Hz",
        p.fs(),
        head.fs_hz
    );
    ensure_param!(n_tilde >= p.len(), "{n_tilde}-sample buffers cannot hold the {}-sample reference", p.len());

    let phi = gen_sensing_matrix(head.seed, head.y_tilde.len(), n_tilde)?;
    let dict = CorrelationDictionary::build(p, n_tilde)?;
    let a = measurement_operator(&phi, &dict)?;
    let scale = phi.scale();

    let mut sorted: Vec<&MeasurementPacket> = packets.iter().collect();
    sorted.sort_by_key(|p| p.buffer_index);
    let buffers = sorted
        .par_iter()
        .map(|pk| {
            let y: Vec<f64> = pk.y_tilde.iter().map(|&v| v as f64 * scale).collect();
            let mut s = solve_l1(&a, &y, cfg)?;
            s.zero_index = n_tilde - 1;
            s.buffer_index = pk.buffer_index as usize;
            match mode {
                RecoveryMode::Sxcorr => Ok(s),
                RecoveryMode::StructSxcorr => structured_prune(&s, &dict, cfg.k, cfg.mu0),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let count = head.buffer_count as usize;
    let missing: Vec<usize> = (0..count).filter(|i| !sorted.iter().any(|p| p.buffer_index as usize == *i)).collect();
    if !missing.is_empty() {
        log::warn!("recovering without buffers {missing:?}");
    }
    Ok(BufferedRecovery { buffers, missing, buffer_count: count, n_tilde, fs: p.fs(), alpha: head.alpha as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::sensing::compress_buffered;
    use crate::signal::{gen_linear_chirp, simulate_channel_samples, ChannelProfile, ChirpSpec};
    use nalgebra::DVector;
    use proptest::prelude::*;
    use rand::Rng as _;

    fn random_signal(n: usize, seed: u64) -> SampledSignal {
        let mut r = rng::from_seed(seed);
        SampledSignal::new((0..n).map(|_| r.random_range(-1.0..1.0)).collect(), 1000.0).unwrap()
    }

    fn coeffs(values: Vec<f64>) -> SparseCoefficients {
        let mut s = SparseCoefficients::zeros(values.len(), 0);
        s.values = values;
        s
    }

    #[test]
    fn operator_matches_dense_product() {
        for (n, seed) in [(16, 1), (300, 2)] {
            let p = random_signal(n / 2, seed);
            let dict = CorrelationDictionary::build(&p, n).unwrap();
            let phi = gen_sensing_matrix(seed, 5, n).unwrap();
            let a = measurement_operator(&phi, &dict).unwrap();
            let dense_phi = DMatrix::from_fn(5, n, |r, c| phi.entry(r, c));
            let expect = dense_phi * dict.to_dense();
            assert!((a - expect).amax() < 1e-9);
        }
    }

    #[test]
    fn one_sparse_identity_recovery() {
        let mut r = rng::from_seed(10);
        for trial in 0..100 {
            let p = random_signal(64, 1000 + trial);
            let dict = CorrelationDictionary::build(&p, 64).unwrap();
            let j = r.random_range(0..dict.cols());
            let y = dict.column(j);
            let cfg = SolverConfig { lambda_ratio: 0.01, weighted: true, ..Default::default() };
            let s = solve_l1(&dict.to_dense(), &y, &cfg).unwrap();
            assert_eq!(s.argmax(), Some(j), "trial {trial}");
        }
    }

    /// Exhaustive search over supports of size at most two for an exact fit.
    fn l0_support(a: &DMatrix<f64>, y: &DVector<f64>) -> Vec<usize> {
        let n = a.ncols();
        let mut best: Option<(f64, Vec<usize>)> = None;
        let mut consider = |support: Vec<usize>| {
            let sub = a.select_columns(&support);
            let Some(x) = sub.clone().svd(true, true).solve(y, 1e-12).ok() else { return };
            let r = (sub * x - y).norm();
            if best.as_ref().is_none_or(|(b, _)| r < *b - 1e-12) {
                best = Some((r, support));
            }
        };
        for i in 0..n {
            consider(vec![i]);
        }
        for i in 0..n {
            for j in i + 1..n {
                consider(vec![i, j]);
            }
        }
        best.unwrap().1
    }

    #[test]
    fn l1_support_matches_l0_on_tiny_instances() {
        let mut r = rng::from_seed(20);
        let mut agree = 0;
        for trial in 0..200u64 {
            let p = random_signal(8, 5000 + trial);
            let dict = CorrelationDictionary::build(&p, 8).unwrap();
            let a = dict.to_dense();
            let sparsity = 1 + (trial % 2) as usize;
            let mut truth = DVector::zeros(dict.cols());
            while truth.iter().filter(|v| **v != 0.0).count() < sparsity {
                let sign = if r.random_bool(0.5) { 1.0 } else { -1.0 };
                truth[r.random_range(0..dict.cols())] = sign * r.random_range(0.5..1.5);
            }
            let y = &a * &truth;
            let cfg = SolverConfig {
                lambda_ratio: 1e-4,
                max_iterations: 50_000,
                convergence_tol: 1e-12,
                weighted: true,
                ..Default::default()
            };
            let s = solve_l1(&a, y.as_slice(), &cfg).unwrap();
            let top = s.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let l1: Vec<usize> = (0..s.len()).filter(|&i| s.values[i].abs() > 1e-2 * top).collect();
            if l1 == l0_support(&a, &y) {
                agree += 1;
            }
        }
        assert!(agree >= 190, "agreement {agree}/200");
    }

    #[test]
    fn prune_trivial_inputs() {
        let p = random_signal(10, 3);
        let dict = CorrelationDictionary::build(&p, 10).unwrap();
        let zero = coeffs(vec![0.0; 19]);
        assert_eq!(structured_prune(&zero, &dict, 5, 0.6).unwrap().values, zero.values);
        let mut one = vec![0.0; 19];
        one[4] = -2.0;
        assert_eq!(structured_prune(&coeffs(one.clone()), &dict, 5, 0.6).unwrap().values, one);
        assert!(structured_prune(&coeffs(vec![0.0; 5]), &dict, 5, 0.6).is_err());
    }

    #[test]
    fn prune_drops_adjacent_chirp_shift() {
        // Heavily oversampled, so neighbouring shifts are nearly parallel.
        let p = gen_linear_chirp(&ChirpSpec::new(500.0, 1500.0, 0.005, 48_000.0).unwrap()).unwrap();
        let dict = CorrelationDictionary::build(&p, 240).unwrap();
        let i = 200;
        assert!(dict.coherent_index_set(i, 0.6).unwrap().contains(&(i + 1)));
        let mut v = vec![0.0; dict.cols()];
        v[i] = 3.0;
        v[i + 1] = 2.0;
        let out = structured_prune(&coeffs(v), &dict, 5, 0.6).unwrap();
        assert_eq!(out.values[i], 3.0);
        assert_eq!(out.values[i + 1], 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn prune_contract(
            seed in any::<u64>(),
            values in proptest::collection::vec(-5.0f64..5.0, 31),
            k in 1usize..8,
            mu0 in 0.05f64..1.0,
        ) {
            let dict = CorrelationDictionary::build(&random_signal(16, seed), 16).unwrap();
            let s = coeffs(values.clone());
            let out = structured_prune(&s, &dict, k, mu0).unwrap();
            let kept: Vec<usize> = (0..31).filter(|&i| out.values[i] != 0.0).collect();
            prop_assert!(kept.len() <= k);
            for (x, &i) in kept.iter().enumerate() {
                prop_assert_eq!(out.values[i], values[i]);
                for &j in &kept[x + 1..] {
                    prop_assert!(dict.coherence(i, j).unwrap() < mu0);
                }
            }
            if let Some(top) = s.argmax() {
                prop_assert_eq!(out.values[top], values[top]);
            }
        }
    }

    #[test]
    fn noiseless_full_rate_recovers_truth_lag() {
        let p = gen_linear_chirp(&ChirpSpec::mote()).unwrap();
        for (delay, seed) in [(40usize, 1u64), (200, 2), (333, 3)] {
            let ch = ChannelProfile::line_of_sight(delay, f64::INFINITY, seed);
            let (x, truth) = simulate_channel_samples(&p, &ch, 600).unwrap();
            let packets = compress_buffered(&x, 4, 1.0, seed).unwrap();
            let rec = recover_buffered(&packets, &p, &SolverConfig::default(), RecoveryMode::Sxcorr).unwrap();
            let (buf, idx) = rec
                .buffers
                .iter()
                .filter_map(|b| b.argmax().map(|i| (b, i)))
                .max_by(|a, b| a.0.values[a.1].abs().total_cmp(&b.0.values[b.1].abs()))
                .unwrap();
            let total = 150 * buf.buffer_index as isize - buf.lag(idx);
            assert_eq!(total, truth as isize);
        }
    }

    #[test]
    fn metadata_mismatch_is_protocol_error() {
        let p = gen_linear_chirp(&ChirpSpec::mote()).unwrap();
        let x = random_signal(600, 4);
        let x = SampledSignal::new(x.into_samples(), 15_000.0).unwrap();
        let mut packets = compress_buffered(&x, 4, 0.3, 9).unwrap();
        let cfg = SolverConfig::default();
        packets[2].seed ^= 1;
        assert!(matches!(recover_buffered(&packets, &p, &cfg, RecoveryMode::Sxcorr), Err(Error::Protocol(_))));
        packets[2].seed ^= 1;
        packets[3].buffer_index = 2;
        assert!(matches!(recover_buffered(&packets, &p, &cfg, RecoveryMode::Sxcorr), Err(Error::Protocol(_))));
        assert!(matches!(recover_buffered(&[], &p, &cfg, RecoveryMode::Sxcorr), Err(Error::Protocol(_))));
    }

    #[test]
    fn missing_buffers_are_reported() {
        let p = gen_linear_chirp(&ChirpSpec::mote()).unwrap();
        let x = SampledSignal::new(random_signal(600, 5).into_samples(), 15_000.0).unwrap();
        let mut packets = compress_buffered(&x, 4, 0.3, 9).unwrap();
        packets.remove(1);
        let rec = recover_buffered(&packets, &p, &SolverConfig::default(), RecoveryMode::StructSxcorr).unwrap();
        assert_eq!(rec.missing, vec![1]);
        let idx: Vec<usize> = rec.buffers.iter().map(|b| b.buffer_index).collect();
        assert_eq!(idx, vec![0, 2, 3]);
        assert!(rec.buffers.iter().all(|b| b.nnz() <= 5));
    }
}
