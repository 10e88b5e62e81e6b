//! The correlation dictionary: every integer time shift of the reference.
//!
//! For an `n`-sample window the dictionary has `2n - 1` columns. Column `j`
//! holds the reference shifted to lag `j - (n - 1)`:
//!
//! ```text
//! ψ_j[t] = p[t + lag_j]   when 0 <= t + lag_j < n, else 0
//! ```
//!
//! Negative lags (the first `n - 1` columns) are delayed copies of `p`
//! entering from the end of the window, positive lags are tails of `p` left
//! over from a copy that started before the window. A reference shorter than
//! the window is right-padded with zeros first.
//!
//! The matrix is never stored: columns are generated from the padded reference
//! on demand, and `Ψᵀx` is exactly the cross-correlation of `p` with `x`.

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{ensure_param, Error, Result};
use crate::signal::SampledSignal;

#[derive(Debug, Clone)]
pub struct CorrelationDictionary {
    source: SampledSignal,
    /// Reference right-padded to the window length.
    padded: Vec<f64>,
    norms: Vec<f64>,
}

impl CorrelationDictionary {
    /// Builds the dictionary for an `n_a`-sample window.
    pub fn build(p: &SampledSignal, n_a: usize) -> Result<Self> {
        ensure_param!(!p.is_empty(), "reference signal is empty");
        ensure_param!(n_a >= p.len(), "window of {n_a} samples is shorter than the {}-sample reference", p.len());
        let padded = p.zero_padded(n_a)?.into_samples();

        let mut energy = Vec::with_capacity(n_a + 1);
        energy.push(0.0);
        for v in &padded {
            energy.push(energy.last().unwrap() + v * v);
        }
        let n = n_a as isize;
        let norms = (0..2 * n_a - 1)
            .map(|j| {
                let lag = j as isize - (n - 1);
                let lo = lag.max(0) as usize;
                let hi = (n + lag).min(n) as usize;
                (energy[hi] - energy[lo]).max(0.0).sqrt()
            })
            .collect();
        Ok(CorrelationDictionary { source: p.clone(), padded, norms })
    }

    pub fn source(&self) -> &SampledSignal {
        &self.source
    }

    /// Window length (row count).
    pub fn rows(&self) -> usize {
        self.padded.len()
    }

    /// Number of atoms, `2 * rows - 1`.
    pub fn cols(&self) -> usize {
        2 * self.padded.len() - 1
    }

    pub fn lag_of_column(&self, j: usize) -> isize {
        j as isize - (self.rows() as isize - 1)
    }

    pub fn column_of_lag(&self, lag: isize) -> Option<usize> {
        let j = lag + self.rows() as isize - 1;
        (j >= 0 && (j as usize) < self.cols()).then_some(j as usize)
    }

    pub fn norm(&self, j: usize) -> f64 {
        self.norms[j]
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn is_zero_column(&self, j: usize) -> bool {
        self.norms[j] == 0.0
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        let n = self.rows() as isize;
        let lag = self.lag_of_column(j);
        (0..n)
            .map(|t| {
                let u = t + lag;
                if (0..n).contains(&u) {
                    self.padded[u as usize]
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows(), self.cols());
        for j in 0..self.cols() {
            m.set_column(j, &nalgebra::DVector::from_vec(self.column(j)));
        }
        m
    }

    /// `Ψ s`: superposition of shifted references.
    pub fn synthesize(&self, s: &[f64]) -> Result<Vec<f64>> {
        ensure_param!(s.len() == self.cols(), "expected {} coefficients, got {}", self.cols(), s.len());
        let n = self.rows() as isize;
        let mut x = vec![0.0; self.rows()];
        for (j, &c) in s.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let lag = self.lag_of_column(j);
            let (t_lo, t_hi) = ((-lag).max(0), (n - lag).min(n));
            for t in t_lo..t_hi {
                x[t as usize] += c * self.padded[(t + lag) as usize];
            }
        }
        Ok(x)
    }

    /// Inner product of two columns.
    pub fn inner(&self, i: usize, j: usize) -> f64 {
        let n = self.rows() as isize;
        let (a, b) = (self.lag_of_column(i), self.lag_of_column(j));
        let t_lo = 0.max(-a).max(-b);
        let t_hi = n.min(n - a).min(n - b);
        (t_lo..t_hi).map(|t| self.padded[(t + a) as usize] * self.padded[(t + b) as usize]).sum()
    }

    /// Normalized absolute inner product, `None` when either column is zero.
    pub fn coherence(&self, i: usize, j: usize) -> Option<f64> {
        let d = self.norms[i] * self.norms[j];
        (d > 0.0).then(|| (self.inner(i, j).abs() / d).min(1.0))
    }

    /// Largest coherence over distinct nonzero column pairs.
    ///
    /// Two columns `δ` lags apart overlap on a contiguous stretch of
    /// `p[u] p[u + δ]`, so one prefix-sum pass per shift answers every pair at
    /// that shift; the total cost is O(n²) rather than O(n³).
    pub fn mutual_coherence(&self) -> Result<f64> {
        let nonzero = self.norms.iter().filter(|&&v| v > 0.0).count();
        if nonzero < 2 {
            return Err(Error::Parameter("mutual coherence needs at least two nonzero columns".into()));
        }
        let n = self.rows();
        let p = &self.padded;
        let mut best: f64 = 0.0;
        let mut prefix = vec![0.0; n + 1];
        for delta in 1..n {
            for u in 0..n - delta {
                prefix[u + 1] = prefix[u] + p[u] * p[u + delta];
            }
            let limit = n - delta;
            // Pair (i, i + δ) with lag a = lag_i covers u in [max(a, 0), min(n + a, n - δ)).
            for i in 0..self.cols() - delta {
                let j = i + delta;
                let d = self.norms[i] * self.norms[j];
                if d == 0.0 {
                    continue;
                }
                let a = self.lag_of_column(i);
                let lo = a.max(0) as usize;
                let hi = (n as isize + a).min(limit as isize);
                if hi <= lo as isize {
                    continue;
                }
                let dot = prefix[hi as usize] - prefix[lo];
                best = best.max((dot.abs() / d).min(1.0));
            }
        }
        Ok(best)
    }

    /// Columns whose coherence with `l_star` is at least `mu0`. Always
    /// contains `l_star`; zero columns never qualify.
    pub fn coherent_index_set(&self, l_star: usize, mu0: f64) -> Result<Vec<usize>> {
        ensure_param!(l_star < self.cols(), "column {l_star} out of range");
        ensure_param!((0.0..=1.0).contains(&mu0), "target coherence must lie in [0, 1], got {mu0}");
        if self.is_zero_column(l_star) {
            return Err(Error::Parameter(format!("column {l_star} is all zero")));
        }
        Ok((0..self.cols())
            .filter(|&j| j == l_star || self.coherence(l_star, j).is_some_and(|c| c >= mu0))
            .collect())
    }

    /// Dumps the matrix as CSV in column-major order, one column per line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for j in 0..self.cols() {
            let col = self.column(j);
            let line: Vec<String> = col.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// `Ψᵀ x`: entry `j` is the column-`j` inner product, which is the reference
/// cross-correlation at lag `j - (n - 1)`.
pub fn correlate_via_dictionary(dict: &CorrelationDictionary, x: &[f64]) -> Result<Vec<f64>> {
    ensure_param!(x.len() == dict.rows(), "signal has {} samples, dictionary expects {}", x.len(), dict.rows());
    let n = dict.rows() as isize;
    Ok((0..dict.cols())
        .map(|j| {
            let lag = dict.lag_of_column(j);
            let (t_lo, t_hi) = ((-lag).max(0), (n - lag).min(n));
            (t_lo..t_hi).map(|t| dict.padded[(t + lag) as usize] * x[t as usize]).sum()
        })
        .collect())
}
