//! 2D position from anchor ranges, and simulated localization rounds.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::Method;
use crate::error::{ensure_param, Error, Result};
use crate::experiment::median_with_failures;
use crate::pipeline::{range_trace, PipelineConfig};
use crate::rng;
use crate::signal::{gen_linear_chirp, simulate_channel_samples, ChannelPreset, ChirpSpec};

pub type Point = [f64; 2];

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Known anchor positions with one measured distance each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorSet {
    pub anchors: Vec<Point>,
    pub ranges: Vec<f64>,
}

impl AnchorSet {
    pub fn new(anchors: Vec<Point>, ranges: Vec<f64>) -> Result<Self> {
        let set = AnchorSet { anchors, ranges };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_param!(self.anchors.len() >= 3, "2D multilateration needs at least 3 anchors, got {}", self.anchors.len());
        ensure_param!(self.anchors.len() == self.ranges.len(), "{} anchors but {} ranges", self.anchors.len(), self.ranges.len());
        ensure_param!(
            self.ranges.iter().all(|r| r.is_finite() && *r >= 0.0),
            "ranges must be finite and non-negative"
        );
        ensure_param!(self.anchors.iter().flatten().all(|c| c.is_finite()), "anchor coordinates must be finite");
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionFix {
    pub position: Point,
    /// Euclidean norm of the linearized system's residual.
    pub residual: f64,
}

/// Linear least-squares position. Each anchor's circle equation minus the
/// first anchor's gives one row of `2 (a_i − a_0) · x = |a_i|² − |a_0|² − r_i² + r_0²`.
pub fn multilaterate(set: &AnchorSet) -> Result<PositionFix> {
    set.validate()?;
    let a0 = set.anchors[0];
    let r0 = set.ranges[0];
    let rows = set.anchors.len() - 1;
    let norm2 = |a: Point| a[0] * a[0] + a[1] * a[1];
    let a = DMatrix::from_fn(rows, 2, |i, j| 2.0 * (set.anchors[i + 1][j] - a0[j]));
    let b = DVector::from_fn(rows, |i, _| {
        let ai = set.anchors[i + 1];
        let ri = set.ranges[i + 1];
        norm2(ai) - norm2(a0) - ri * ri + r0 * r0
    });

    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax == 0.0 || smin <= smax * 1e-10 {
        return Err(Error::RankDeficient(format!(
            "anchor geometry is degenerate (singular values {smax:.3e}, {smin:.3e})"
        )));
    }
    let x = svd.solve(&b, 0.0).map_err(|e| Error::RankDeficient(e.to_string()))?;
    let residual = (&a * &x - &b).norm();
    Ok(PositionFix { position: [x[0], x[1]], residual })
}

/// Layout and ranging setup of a localization experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub anchors: Vec<Point>,
    /// Per-anchor amplitude gain applied to the SNR; missing entries are 1.
    pub anchor_gains: Vec<f64>,
    pub beacon: Point,
    pub preset: ChannelPreset,
    pub snr_db: f64,
    pub method: Method,
    pub chirp: ChirpSpec,
    pub trace_len: usize,
    pub pipeline: PipelineConfig,
    pub loss_rates: Vec<f64>,
    pub rounds: usize,
    pub seed: u64,
}

impl Default for Scenario {
    /// Five anchors on a 3–8 m arc within ±40° of the speaker axis.
    fn default() -> Self {
        let anchors = [(-40.0f64, 3.0), (-20.0, 4.5), (0.0, 6.0), (20.0, 7.0), (40.0, 8.0)]
            .iter()
            .map(|&(deg, r)| [r * deg.to_radians().sin(), r * deg.to_radians().cos()])
            .collect();
        Scenario {
            anchors,
            anchor_gains: Vec::new(),
            beacon: [0.0, 0.0],
            preset: ChannelPreset::CaseB,
            snr_db: 20.0,
            method: Method::StructSxcorr,
            chirp: ChirpSpec::mote(),
            trace_len: 600,
            pipeline: PipelineConfig::default(),
            loss_rates: vec![0.0, 0.1, 0.2, 0.3, 0.4],
            rounds: 50,
            seed: 1,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        ensure_param!(self.anchors.len() >= 3, "scenario needs at least 3 anchors");
        ensure_param!(self.anchor_gains.iter().all(|g| *g > 0.0), "anchor gains must be positive");
        ensure_param!(self.loss_rates.iter().all(|l| (0.0..=1.0).contains(l)), "loss rates must lie in [0, 1]");
        ensure_param!(self.rounds >= 1, "rounds must be at least 1");
        self.chirp.validate()
    }

    fn gain(&self, i: usize) -> f64 {
        self.anchor_gains.get(i).copied().unwrap_or(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundOutcome {
    pub round: usize,
    pub loss_rate: f64,
    pub anchors_used: usize,
    pub position: Option<Point>,
    /// Distance from the true beacon; `None` when the round failed.
    pub error_m: Option<f64>,
}

/// One TDMA round: every anchor whose packet survives ranges the beacon
/// through the configured pipeline, then the surviving ranges are
/// multilaterated. `keep[i]` says whether anchor `i`'s packet arrived.
pub fn simulate_localization_round(scenario: &Scenario, keep: &[bool], seed: u64) -> Result<Option<PositionFix>> {
    scenario.validate()?;
    ensure_param!(keep.len() == scenario.anchors.len(), "loss mask length does not match anchor count");
    let p = gen_linear_chirp(&scenario.chirp)?;
    let fs = scenario.chirp.fs;
    let speed = scenario.pipeline.speed;
    let mut anchors = Vec::new();
    let mut ranges = Vec::new();
    for (i, &anchor) in scenario.anchors.iter().enumerate() {
        if !keep[i] {
            continue;
        }
        let s = rng::derive_seed(seed, i as u64);
        let delay = (dist(anchor, scenario.beacon) / speed * fs).round() as usize;
        let snr = scenario.snr_db + 20.0 * scenario.gain(i).log10();
        let ch = scenario.preset.profile(delay, fs, snr, s);
        let (x, _) = simulate_channel_samples(&p, &ch, scenario.trace_len)?;
        let cfg = PipelineConfig { seed: rng::derive_seed(s, 1), ..scenario.pipeline };
        let est = range_trace(&x, &p, scenario.method, &cfg)?;
        if let (true, Some(r)) = (est.valid, est.range_m) {
            anchors.push(anchor);
            ranges.push(r);
        }
    }
    if anchors.len() < 3 {
        return Ok(None);
    }
    match multilaterate(&AnchorSet { anchors, ranges }) {
        Ok(fix) => Ok(Some(fix)),
        Err(Error::RankDeficient(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Runs `rounds` rounds per loss rate. Each round draws one uniform per
/// anchor and drops the anchor when it falls below the loss rate, so the
/// surviving sets shrink monotonically as the rate grows and every rate sees
/// the same traces.
pub fn run_localization(scenario: &Scenario) -> Result<Vec<RoundOutcome>> {
    scenario.validate()?;
    let per_round: Vec<Vec<RoundOutcome>> = (0..scenario.rounds)
        .into_par_iter()
        .map(|round| -> Result<Vec<RoundOutcome>> {
            let seed = rng::derive_seed(scenario.seed, round as u64);
            let mut r = rng::from_seed(rng::derive_seed(seed, 0xd20b));
            let draws: Vec<f64> = (0..scenario.anchors.len()).map(|_| r.random::<f64>()).collect();
            scenario
                .loss_rates
                .iter()
                .map(|&loss| {
                    let keep: Vec<bool> = draws.iter().map(|u| *u >= loss).collect();
                    let fix = simulate_localization_round(scenario, &keep, seed)?;
                    Ok(RoundOutcome {
                        round,
                        loss_rate: loss,
                        anchors_used: keep.iter().filter(|k| **k).count(),
                        position: fix.map(|f| f.position),
                        error_m: fix.map(|f| dist(f.position, scenario.beacon)),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut out: Vec<RoundOutcome> = per_round.into_iter().flatten().collect();
    out.sort_by(|a, b| a.loss_rate.total_cmp(&b.loss_rate).then(a.round.cmp(&b.round)));
    Ok(out)
}

/// Median position error per loss rate, failed rounds counting as infinite.
pub fn median_error_by_loss(outcomes: &[RoundOutcome]) -> Vec<(f64, f64)> {
    let mut rates: Vec<f64> = outcomes.iter().map(|o| o.loss_rate).collect();
    rates.sort_by(f64::total_cmp);
    rates.dedup();
    rates
        .into_iter()
        .map(|l| {
            let med = median_with_failures(outcomes.iter().filter(|o| o.loss_rate == l).map(|o| o.error_m));
            (l, med.unwrap_or(f64::NAN))
        })
        .collect()
}

/// Exact ranges from `beacon` perturbed by zero-mean Gaussian noise.
pub fn noisy_ranges(anchors: &[Point], beacon: Point, sigma: f64, seed: u64) -> Result<Vec<f64>> {
    ensure_param!(sigma >= 0.0 && sigma.is_finite(), "noise deviation must be finite and non-negative");
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Parameter(e.to_string()))?;
    let mut r = rng::from_seed(seed);
    Ok(anchors.iter().map(|&a| (dist(a, beacon) + normal.sample(&mut r)).max(0.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square() -> Vec<Point> {
        vec![[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0], [5.0, 9.0]]
    }

    fn exact(anchors: &[Point], beacon: Point) -> AnchorSet {
        AnchorSet { anchors: anchors.to_vec(), ranges: anchors.iter().map(|&a| dist(a, beacon)).collect() }
    }

    #[test]
    fn exact_ranges_give_exact_position() {
        let fix = multilaterate(&exact(&square(), [3.3, 7.1])).unwrap();
        assert!(dist(fix.position, [3.3, 7.1]) < 1e-6);
        assert!(fix.residual < 1e-9);
    }

    #[test]
    fn collinear_and_short_sets_fail() {
        let line = vec![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [5.0, 5.0]];
        assert!(matches!(multilaterate(&exact(&line, [1.0, 0.0])), Err(Error::RankDeficient(_))));
        let two = AnchorSet { anchors: vec![[0.0, 0.0], [1.0, 0.0]], ranges: vec![1.0, 1.0] };
        assert!(matches!(multilaterate(&two), Err(Error::Parameter(_))));
        let neg = AnchorSet { ranges: vec![-1.0, 1.0, 1.0, 1.0, 1.0], ..exact(&square(), [1.0, 1.0]) };
        assert!(matches!(multilaterate(&neg), Err(Error::Parameter(_))));
    }

    #[test]
    fn beacon_on_an_anchor_is_solvable() {
        let fix = multilaterate(&exact(&square(), [10.0, 0.0])).unwrap();
        assert!(dist(fix.position, [10.0, 0.0]) < 1e-6);
    }

    #[test]
    fn two_centimetre_noise_stays_under_ten() {
        let anchors = square();
        let beacon = [4.0, 6.0];
        let errs: Vec<Option<f64>> = (0..500u64)
            .map(|t| {
                let ranges = noisy_ranges(&anchors, beacon, 0.02, t).unwrap();
                let fix = multilaterate(&AnchorSet { anchors: anchors.clone(), ranges }).unwrap();
                Some(dist(fix.position, beacon))
            })
            .collect();
        assert!(median_with_failures(errs).unwrap() < 0.10);
    }

    #[test]
    fn error_grows_with_range_noise() {
        let anchors = square();
        let beacon = [4.0, 6.0];
        let median_at = |sigma: f64| {
            median_with_failures((0..300u64).map(|t| {
                let ranges = noisy_ranges(&anchors, beacon, sigma, t).unwrap();
                Some(dist(multilaterate(&AnchorSet { anchors: anchors.clone(), ranges }).unwrap().position, beacon))
            }))
            .unwrap()
        };
        let m: Vec<f64> = [0.0, 0.01, 0.02, 0.05, 0.1].iter().map(|s| median_at(*s)).collect();
        assert!(m.windows(2).all(|w| w[0] <= w[1]), "{m:?}");
    }

    #[test]
    fn noiseless_round_is_within_quantization() {
        let sc = Scenario {
            preset: ChannelPreset::CaseA,
            snr_db: f64::INFINITY,
            pipeline: PipelineConfig { alpha: 1.0, ..Default::default() },
            ..Default::default()
        };
        let fix = simulate_localization_round(&sc, &[true; 5], 4).unwrap().unwrap();
        assert!(dist(fix.position, sc.beacon) < 0.03, "{:?}", fix.position);
    }

    #[test]
    fn too_few_surviving_anchors_fail_the_round() {
        let sc = Scenario { preset: ChannelPreset::CaseA, ..Default::default() };
        assert_eq!(simulate_localization_round(&sc, &[true, false, false, true, false], 1).unwrap(), None);
        assert!(simulate_localization_round(&sc, &[true; 3], 1).is_err());
    }

    #[test]
    fn loss_sweep_is_non_improving() {
        let sc = Scenario { rounds: 40, loss_rates: vec![0.0, 0.2, 0.4, 0.6], ..Default::default() };
        let out = run_localization(&sc).unwrap();
        assert_eq!(out.len(), 160);
        let med = median_error_by_loss(&out);
        assert!(med.windows(2).all(|w| w[0].1 <= w[1].1), "{med:?}");
        let survived = out.iter().filter(|o| o.loss_rate == 0.2 && o.position.is_some()).count();
        assert!(survived > 20, "{survived}/40");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn rigid_motions_commute_with_multilateration(
            theta in 0.0..std::f64::consts::TAU,
            tx in -50.0..50.0f64,
            ty in -50.0..50.0f64,
            bx in 1.0..9.0f64,
            by in 1.0..9.0f64,
        ) {
            let (s, c) = theta.sin_cos();
            let t = |p: Point| [c * p[0] - s * p[1] + tx, s * p[0] + c * p[1] + ty];
            let beacon = [bx, by];
            let set = exact(&square(), beacon);
            let moved = AnchorSet { anchors: set.anchors.iter().map(|&a| t(a)).collect(), ranges: set.ranges.clone() };
            let p0 = multilaterate(&set).unwrap().position;
            let p1 = multilaterate(&moved).unwrap().position;
            prop_assert!(dist(t(p0), p1) < 1e-9);
        }
    }
}
