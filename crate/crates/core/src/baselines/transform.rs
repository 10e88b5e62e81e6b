//! Orthonormal DCT-II and energy-compaction profiles.

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::xcorr_fd;
use crate::error::{ensure_param, Result};
use crate::signal::SampledSignal;

/// Orthonormal DCT-II matrix `D`, so `c = D x` and `x = Dᵀ c`.
pub fn dct_matrix(n: usize) -> DMatrix<f64> {
    let nf = n as f64;
    DMatrix::from_fn(n, n, |k, t| {
        let s = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        s * (std::f64::consts::PI * (t as f64 + 0.5) * k as f64 / nf).cos()
    })
}

pub fn dct(x: &[f64]) -> Vec<f64> {
    (dct_matrix(x.len()) * nalgebra::DVector::from_column_slice(x)).iter().copied().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Domain {
    Correlation,
    Dct,
    Fft,
}

impl Domain {
    pub const ALL: [Domain; 3] = [Domain::Correlation, Domain::Dct, Domain::Fft];
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Domain::Correlation => "CORRELATION",
            Domain::Dct => "DCT",
            Domain::Fft => "FFT",
        })
    }
}

impl std::str::FromStr for Domain {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Domain::ALL
            .into_iter()
            .find(|d| d.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| crate::Error::Parameter(format!("unknown domain {s:?}")))
    }
}

/// Coefficient magnitudes of one representation, sorted descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityProfile {
    pub domain: Domain,
    pub sorted_magnitudes: Vec<f64>,
}

impl SparsityProfile {
    /// Fewest largest coefficients holding at least `fraction` of the energy.
    /// A zero profile needs none.
    pub fn k_for(&self, fraction: f64) -> usize {
        let total: f64 = self.sorted_magnitudes.iter().map(|m| m * m).sum();
        if total == 0.0 {
            return 0;
        }
        let target = fraction.clamp(0.0, 1.0) * total;
        let mut acc = 0.0;
        for (i, m) in self.sorted_magnitudes.iter().enumerate() {
            acc += m * m;
            // Guards against the last partial sum falling a rounding error short.
            if acc >= target * (1.0 - 1e-12) {
                return i + 1;
            }
        }
        self.sorted_magnitudes.len()
    }
}

/// Representation of `x` in `domain`: the full correlation with `p`, the
/// DCT-II coefficients, or the FFT magnitudes.
pub fn sparsity_profile(p: &SampledSignal, x: &SampledSignal, domain: Domain) -> Result<SparsityProfile> {
    ensure_param!(!x.is_empty(), "signal is empty");
    let mut mags: Vec<f64> = match domain {
        Domain::Correlation => xcorr_fd(p.samples(), x.samples())?.values.iter().map(|v| v.abs()).collect(),
        Domain::Dct => dct(x.samples()).iter().map(|v| v.abs()).collect(),
        Domain::Fft => {
            let mut buf: Vec<Complex<f64>> = x.samples().iter().map(|&v| Complex::new(v, 0.0)).collect();
            FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
            buf.iter().map(|c| c.norm()).collect()
        }
    };
    mags.sort_by(|a, b| b.total_cmp(a));
    Ok(SparsityProfile { domain, sorted_magnitudes: mags })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn dct_is_orthonormal() {
        let d = dct_matrix(17);
        let eye = &d * d.transpose();
        assert!((eye - DMatrix::identity(17, 17)).amax() < 1e-12);
        // Direct definition of coefficient 3 for a ramp.
        let x: Vec<f64> = (0..8).map(|t| t as f64).collect();
        let expect: f64 = (0..8).map(|t| t as f64 * (std::f64::consts::PI * (t as f64 + 0.5) * 3.0 / 8.0).cos()).sum::<f64>() * 0.5;
        assert!((dct(&x)[3] - expect).abs() < 1e-12);
    }

    #[test]
    fn impulses_are_one_sparse_in_their_domain() {
        let mut atom = vec![0.0; 32];
        atom[5] = 1.0;
        let d = dct_matrix(32);
        let x: Vec<f64> = d.transpose().column(5).iter().copied().collect();
        let sig = SampledSignal::new(x, 1.0).unwrap();
        let p = SampledSignal::new(vec![1.0], 1.0).unwrap();
        assert_eq!(sparsity_profile(&p, &sig, Domain::Dct).unwrap().k_for(0.99), 1);

        let imp = SampledSignal::new(atom, 1.0).unwrap();
        assert_eq!(sparsity_profile(&p, &imp, Domain::Correlation).unwrap().k_for(0.99), 1);
        let dc = SampledSignal::new(vec![1.0; 32], 1.0).unwrap();
        assert_eq!(sparsity_profile(&p, &dc, Domain::Fft).unwrap().k_for(0.99), 1);
    }

    #[test]
    fn profiles_are_sorted_and_nonnegative() {
        let mut r = rng::from_seed(3);
        let x: Vec<f64> = (0..256).map(|_| StandardNormal.sample(&mut r)).collect();
        let x = SampledSignal::new(x, 1.0).unwrap();
        let p = SampledSignal::new(vec![1.0, -1.0, 0.5], 1.0).unwrap();
        for d in Domain::ALL {
            let prof = sparsity_profile(&p, &x, d).unwrap();
            assert!(prof.sorted_magnitudes.windows(2).all(|w| w[0] >= w[1]));
            assert!(prof.sorted_magnitudes.iter().all(|m| *m >= 0.0));
            // White noise needs most of its coefficients for 95% of the energy.
            let frac = prof.k_for(0.95) as f64 / prof.sorted_magnitudes.len() as f64;
            assert!(frac > 0.5, "{d}: {frac}");
            assert_eq!(d.to_string().parse::<Domain>().unwrap(), d);
        }
    }

    #[test]
    fn k_for_edges() {
        let prof = SparsityProfile { domain: Domain::Dct, sorted_magnitudes: vec![3.0, 2.0, 1.0] };
        assert_eq!(prof.k_for(0.0), 1);
        assert_eq!(prof.k_for(9.0 / 14.0), 1);
        assert_eq!(prof.k_for(0.7), 2);
        assert_eq!(prof.k_for(1.0), 3);
        let zero = SparsityProfile { domain: Domain::Dct, sorted_magnitudes: vec![0.0; 4] };
        assert_eq!(zero.k_for(0.5), 0);
    }
}
