//! Monotone accelerated proximal gradient (MFISTA) for the Lasso
//!
//! ```text
//! minimize  ½‖A s − y‖²  +  λ ‖s‖₁
//! ```
//!
//! The iterate kept between steps is always the better of the proximal point
//! and the previous iterate, so the objective trace never increases.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_param, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Residual target `‖A s − y‖ <= epsilon`. When set, λ is halved with
    /// warm starts until the target is met.
    pub epsilon: Option<f64>,
    /// Fixed regularization weight. Overrides `lambda_ratio`.
    pub lambda: Option<f64>,
    /// Default weight `lambda_ratio · ‖Aᵀ y‖∞`.
    pub lambda_ratio: f64,
    pub max_iterations: usize,
    /// Relative objective change that ends a solve.
    pub convergence_tol: f64,
    /// Selections kept by structured pruning.
    pub k: usize,
    /// Coherence threshold used by structured pruning.
    pub mu0: f64,
    /// Penalize `Σ ‖a_j‖ |s_j|` instead of `‖s‖₁`, which makes the penalty
    /// blind to column scale.
    pub weighted: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon: None,
            lambda: None,
            lambda_ratio: 0.1,
            max_iterations: 2000,
            convergence_tol: 1e-6,
            k: 5,
            mu0: 0.6,
            weighted: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_param!(self.epsilon.is_none_or(|e| e >= 0.0), "epsilon must be nonnegative");
        ensure_param!(self.lambda.is_none_or(|l| l >= 0.0 && l.is_finite()), "lambda must be finite and nonnegative");
        ensure_param!(self.lambda_ratio > 0.0 && self.lambda_ratio < 1.0, "lambda_ratio must lie in (0, 1)");
        ensure_param!(self.max_iterations >= 1, "max_iterations must be at least 1");
        ensure_param!(self.convergence_tol > 0.0, "convergence_tol must be positive");
        ensure_param!(self.k >= 1, "k must be at least 1");
        ensure_param!(self.mu0 > 0.0 && self.mu0 <= 1.0, "mu0 must lie in (0, 1]");
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub residual: f64,
    pub lambda: f64,
    pub converged: bool,
    /// Objective after every iteration (non-increasing within one λ stage).
    pub objective: Vec<f64>,
}

/// Recovered coefficients of one buffer. Index `i` maps to lag `i - zero_index`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseCoefficients {
    pub values: Vec<f64>,
    pub buffer_index: usize,
    pub zero_index: usize,
    pub diagnostics: SolverDiagnostics,
}

impl SparseCoefficients {
    pub fn zeros(len: usize, buffer_index: usize) -> Self {
        SparseCoefficients {
            values: vec![0.0; len],
            buffer_index,
            zero_index: len.saturating_sub(1) / 2,
            diagnostics: SolverDiagnostics { converged: true, ..Default::default() },
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn lag(&self, index: usize) -> isize {
        index as isize - self.zero_index as isize
    }

    pub fn nnz(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    /// Index of the largest magnitude, smallest index on ties; `None` if all zero.
    pub fn argmax(&self) -> Option<usize> {
        argmax_abs(&self.values)
    }
}

pub(crate) fn argmax_abs(v: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, x) in v.iter().enumerate() {
        let a = x.abs();
        if a > 0.0 && best.is_none_or(|(_, b)| a > b) {
            best = Some((i, a));
        }
    }
    best.map(|(i, _)| i)
}

fn soft_threshold(v: &mut DVector<f64>, t: f64) {
    for x in v.iter_mut() {
        *x = x.signum() * (x.abs() - t).max(0.0);
    }
}

fn l1(v: &DVector<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Upper bound on `‖A‖₂²` from power iteration, inflated by 1%.
fn lipschitz(a: &DMatrix<f64>) -> f64 {
    let mut r = rng::from_seed(0x5eed);
    let mut v = DVector::from_fn(a.ncols(), |_, _| rand::Rng::random_range(&mut r, -1.0..1.0));
    let mut est = 0.0;
    for _ in 0..100 {
        let norm = v.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v /= norm;
        let w = a.tr_mul(&(a * &v));
        let next = w.norm();
        v = w;
        if (next - est).abs() <= 1e-9 * next {
            est = next;
            break;
        }
        est = next;
    }
    est * 1.01
}

struct Stage {
    s: DVector<f64>,
    iterations: usize,
    converged: bool,
}

#[allow(clippy::too_many_arguments)]
fn mfista(
    a: &DMatrix<f64>,
    aty: &DVector<f64>,
    y: &DVector<f64>,
    lambda: f64,
    lip: f64,
    start: DVector<f64>,
    budget: usize,
    tol: f64,
    trace: &mut Vec<f64>,
) -> Stage {
    let objective = |s: &DVector<f64>| 0.5 * (a * s - y).norm_squared() + lambda * l1(s);
    let step = 1.0 / lip;
    let mut x = start;
    let mut fx = objective(&x);
    let mut w = x.clone();
    let mut t: f64 = 1.0;
    for it in 1..=budget {
        // Gradient of ½‖A w − y‖² is Aᵀ A w − Aᵀ y.
        let grad = a.tr_mul(&(a * &w)) - aty;
        let mut z = &w - grad * step;
        soft_threshold(&mut z, lambda * step);
        let fz = objective(&z);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let accepted = fz <= fx;
        let prev = x.clone();
        let f_prev = fx;
        if accepted {
            x = z.clone();
            fx = fz;
        }
        w = &x + (&z - &x) * (t / t_next) + (&x - &prev) * ((t - 1.0) / t_next);
        t = t_next;
        trace.push(fx);
        if accepted && (f_prev - fx).abs() <= tol * f_prev.abs().max(f64::MIN_POSITIVE) {
            return Stage { s: x, iterations: it, converged: true };
        }
    }
    Stage { s: x, iterations: budget, converged: false }
}

/// Sparse solution of `A s ≈ y`. Zero columns of `A` are excluded from the
/// solve and reported as zero coefficients.
pub fn solve_l1(a: &DMatrix<f64>, y: &[f64], cfg: &SolverConfig) -> Result<SparseCoefficients> {
    cfg.validate()?;
    ensure_param!(a.nrows() == y.len(), "operator has {} rows, measurement has {}", a.nrows(), y.len());
    ensure_param!(a.ncols() >= 1, "operator has no columns");
    ensure_param!(y.iter().all(|v| v.is_finite()), "measurement contains non-finite values");

    let active: Vec<usize> = (0..a.ncols()).filter(|&j| a.column(j).iter().any(|v| *v != 0.0)).collect();
    let mut out = SparseCoefficients::zeros(a.ncols(), 0);
    let yv = DVector::from_column_slice(y);
    if active.is_empty() || yv.iter().all(|v| *v == 0.0) {
        out.diagnostics.residual = yv.norm();
        out.diagnostics.converged = cfg.epsilon.is_none_or(|e| yv.norm() <= e);
        return Ok(out);
    }
    let mut sub = a.select_columns(&active);
    let weights: Vec<f64> =
        if cfg.weighted { sub.column_iter().map(|c| c.norm()).collect() } else { vec![1.0; active.len()] };
    for (mut c, w) in sub.column_iter_mut().zip(&weights) {
        c /= *w;
    }
    let aty = sub.tr_mul(&yv);
    let lip = lipschitz(&sub);
    let lambda_max = aty.amax();
    let mut lambda = cfg.lambda.unwrap_or(cfg.lambda_ratio * lambda_max);

    let mut trace = Vec::new();
    let mut used = 0;
    let mut s = DVector::zeros(active.len());
    let mut converged;
    loop {
        let stage = mfista(&sub, &aty, &yv, lambda, lip, s, cfg.max_iterations - used, cfg.convergence_tol, &mut trace);
        used += stage.iterations;
        s = stage.s;
        converged = stage.converged;
        let residual = (&sub * &s - &yv).norm();
        match cfg.epsilon {
            Some(eps) if residual > eps => {
                converged = false;
                if used >= cfg.max_iterations || lambda <= lambda_max * 1e-9 {
                    break;
                }
                lambda *= 0.5;
                log::debug!("residual {residual:.3e} above {eps:.3e}; continuing with lambda {lambda:.3e}");
            }
            _ => break,
        }
    }
    if !converged {
        log::warn!("l1 solve did not converge within {} iterations", cfg.max_iterations);
    }
    let residual = (&sub * &s - &yv).norm();
    for (k, &j) in active.iter().enumerate() {
        out.values[j] = s[k] / weights[k];
    }
    out.diagnostics = SolverDiagnostics { iterations: used, residual, lambda, converged, objective: trace };
    Ok(out)
}
