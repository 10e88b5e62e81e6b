//! Full cross-correlation, direct and FFT-based.
//!
//! The sequence follows the matched-filter convention
//!
//! ```text
//! s(τ) = Σ_t p[t + τ] · x[t]
//! ```
//!
//! so a copy of `p` delayed by `D` samples inside `x` peaks at `τ = -D`.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{ensure_param, Result};

/// Correlation values over every lag with nonzero overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct Correlation {
    pub values: Vec<f64>,
    /// Index of lag 0 in `values`.
    pub zero_index: usize,
}

impl Correlation {
    pub fn lag(&self, index: usize) -> isize {
        index as isize - self.zero_index as isize
    }

    pub fn index(&self, lag: isize) -> Option<usize> {
        let i = lag + self.zero_index as isize;
        (i >= 0 && (i as usize) < self.values.len()).then_some(i as usize)
    }

    pub fn at(&self, lag: isize) -> f64 {
        self.index(lag).map_or(0.0, |i| self.values[i])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Direct O(n_p · n_x) evaluation. Lags run from `-(len(x) - 1)` to `len(p) - 1`.
pub fn xcorr_td(p: &[f64], x: &[f64]) -> Result<Correlation> {
    ensure_param!(!p.is_empty() && !x.is_empty(), "correlation inputs must be nonempty");
    let (np, nx) = (p.len(), x.len());
    let zero = nx - 1;
    let mut values = vec![0.0; np + nx - 1];
    for (k, out) in values.iter_mut().enumerate() {
        let lag = k as isize - zero as isize;
        // t ranges where both p[t + lag] and x[t] exist.
        let t_lo = (-lag).max(0) as usize;
        let t_hi = (np as isize - lag).min(nx as isize).max(0) as usize;
        let mut acc = 0.0;
        for t in t_lo..t_hi {
            acc += p[(t as isize + lag) as usize] * x[t];
        }
        *out = acc;
    }
    Ok(Correlation { values, zero_index: zero })
}

/// FFT evaluation with zero padding past `len(p) + len(x) - 1`, so no
/// circular wrap reaches the output.
pub fn xcorr_fd(p: &[f64], x: &[f64]) -> Result<Correlation> {
    ensure_param!(!p.is_empty() && !x.is_empty(), "correlation inputs must be nonempty");
    let (np, nx) = (p.len(), x.len());
    let full = np + nx - 1;
    let size = full.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd: Arc<dyn Fft<f64>> = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);

    let mut a: Vec<Complex<f64>> = p.iter().map(|&v| Complex::new(v, 0.0)).collect();
    a.resize(size, Complex::new(0.0, 0.0));
    let mut b: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    b.resize(size, Complex::new(0.0, 0.0));
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (ai, bi) in a.iter_mut().zip(&b) {
        *ai *= bi.conj();
    }
    inv.process(&mut a);

    let scale = 1.0 / size as f64;
    let zero = nx - 1;
    let values = (0..full)
        .map(|k| {
            let lag = k as isize - zero as isize;
            a[lag.rem_euclid(size as isize) as usize].re * scale
        })
        .collect();
    Ok(Correlation { values, zero_index: zero })
}

/// Lag maximizing `|s(τ)|²`. Ties go to the smallest lag.
pub fn argmax_delay(s: &Correlation) -> Option<isize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in s.values.iter().enumerate() {
        let e = v * v;
        if best.is_none_or(|(_, b)| e > b) {
            best = Some((i, e));
        }
    }
    best.map(|(i, _)| s.lag(i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng as _;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::from_seed(seed);
        (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn impulse_pair() {
        let imp = [1.0, 0.0, 0.0, 0.0];
        let s = xcorr_td(&imp, &imp).unwrap();
        for k in 0..s.len() {
            assert_eq!(s.values[k], if s.lag(k) == 0 { 1.0 } else { 0.0 });
        }
        let f = xcorr_fd(&imp, &imp).unwrap();
        for (a, b) in s.values.iter().zip(&f.values) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn delayed_copy_peaks_at_negative_delay() {
        let p = random(64, 1);
        let mut x = vec![0.0; 400];
        x[220..284].copy_from_slice(&p);
        let s = xcorr_td(&p, &x).unwrap();
        assert_eq!(argmax_delay(&s), Some(-220));
    }

    #[test]
    fn commutation() {
        let p = random(7, 2);
        let x = random(11, 3);
        let px = xcorr_td(&p, &x).unwrap();
        let xp = xcorr_td(&x, &p).unwrap();
        for lag in -12..12 {
            assert!((px.at(lag) - xp.at(-lag)).abs() < 1e-12);
        }
    }

    #[test]
    fn fd_matches_td() {
        for (n, seed) in [(16, 4), (128, 5), (1024, 6)] {
            let p = random(n, seed);
            let x = random(n, seed + 100);
            let td = xcorr_td(&p, &x).unwrap();
            let fd = xcorr_fd(&p, &x).unwrap();
            let scale = td.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in td.values.iter().zip(&fd.values) {
                assert!((a - b).abs() <= 1e-6 * scale);
            }
        }
    }

    #[test]
    fn argmax_ties_and_spikes() {
        let s = Correlation { values: vec![0.0, 0.0, 3.0, 0.0, 0.0], zero_index: 2 };
        assert_eq!(argmax_delay(&s), Some(0));
        let s = Correlation { values: vec![0.0, -2.0, 0.0, 2.0, 0.0], zero_index: 2 };
        assert_eq!(argmax_delay(&s), Some(-1));
        let s = Correlation { values: vec![], zero_index: 0 };
        assert_eq!(argmax_delay(&s), None);
        assert!(xcorr_td(&[], &[1.0]).is_err());
    }
}
